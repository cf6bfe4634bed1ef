#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modgrad/function.hpp"
#include "modgrad/modulus.hpp"
#include "modgrad/plans.hpp"

namespace modgrad {

// Location function holding a gradient candidate. Values are exact (slopes of
// rational vertex values over rational lengths stay rational).
struct WeakGradient {
  LocationKind granularity = LocationKind::EdgePoint;
  std::vector<double> g;
  std::vector<Rational> g_exact;
  std::vector<char> exceptional;  // sigma-null edges, or stars with no sigma-positive edge

  double at(const Location& x) const { return g[static_cast<std::size_t>(x.index)]; }
  const Rational& at_exact(const Location& x) const { return g_exact[static_cast<std::size_t>(x.index)]; }
};

// Slope magnitude |f(v) - f(u)| / l(e), zero on sigma-null edges: those edges
// only appear in zero-modulus families, so the minimal weak upper gradient
// ignores them. Star granularity takes the max over sigma-positive incident
// edges as its essential-sup surrogate.
inline WeakGradient minimal_weak_gradient(const MetricGraph& g, const VertexFunction& f,
                                          LocationKind granularity = LocationKind::EdgePoint) {
  WeakGradient out;
  out.granularity = granularity;
  if (granularity == LocationKind::EdgePoint) {
    out.g.assign(g.edge_count(), 0);
    out.g_exact.assign(g.edge_count(), Rational(0));
    out.exceptional.assign(g.edge_count(), 0);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      if (g.edges[e].measure <= 0) {
        out.exceptional[e] = 1;
        continue;
      }
      out.g_exact[e] = rat_abs(f.slope(g, static_cast<int>(e)));
      out.g[e] = to_double(out.g_exact[e]);
    }
  } else {
    out.g.assign(g.vertex_count(), 0);
    out.g_exact.assign(g.vertex_count(), Rational(0));
    out.exceptional.assign(g.vertex_count(), 0);
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
      bool any = false;
      Rational best(0);
      for (int e : g.incident[v]) {
        if (g.edges[static_cast<std::size_t>(e)].measure <= 0) continue;
        any = true;
        best = std::max(best, rat_abs(f.slope(g, e)));
      }
      if (!any) {
        out.exceptional[v] = 1;
        continue;
      }
      out.g_exact[v] = best;
      out.g[v] = to_double(best);
    }
  }
  return out;
}

// L-infinity norm of the curvewise derivative against the conditional laws of
// the plan: max slope over traversals carrying mass at the location.
inline WeakGradient eta_upper_gradient(const MetricGraph& g, const VertexFunction& f, const Plan& plan,
                                       LocationKind granularity = LocationKind::EdgePoint) {
  WeakGradient out;
  out.granularity = granularity;
  const std::size_t n = granularity == LocationKind::EdgePoint ? g.edge_count() : g.vertex_count();
  out.g.assign(n, 0);
  out.g_exact.assign(n, Rational(0));
  out.exceptional.assign(n, 0);
  const Disintegration d = disintegrate(g, plan, granularity);
  for (const auto& [loc, law] : d.laws) {
    Rational best(0);
    for (const auto& [t, pr] : law.records) {
      const Step& s = plan.atoms[static_cast<std::size_t>(t.atom)].curve.steps[static_cast<std::size_t>(t.step)];
      best = std::max(best, rat_abs(f.slope(g, s.edge)));
    }
    out.g_exact[static_cast<std::size_t>(loc.index)] = best;
    out.g[static_cast<std::size_t>(loc.index)] = to_double(best);
  }
  return out;
}

// Signed curvewise ratio (f composed with the traversal)' / speed.
inline Rational traversal_ratio(const MetricGraph& g, const VertexFunction& f, const Plan& plan,
                                const Traversal& t) {
  const Step& s = plan.atoms[static_cast<std::size_t>(t.atom)].curve.steps[static_cast<std::size_t>(t.step)];
  const Rational slope = f.slope(g, s.edge);
  return s.forward ? slope : Rational(-slope);
}

// ---- representing plan ----

struct RepresentingPlan {
  Plan plan;
  Disintegration dis;  // EdgePoint granularity
  WeakGradient gf;
  std::vector<int> support;            // sigma-positive edges with positive gradient (the set D)
  bool mu_abscont_on_support = true;   // every edge of D carries barycenter mass
  bool esssup_identity = true;         // max signed ratio over each conditional law equals g_f
  std::vector<int> identity_failures;  // edges of D where the identity broke
  double combine_norm_bound = 0;
  std::string note;
};

// Realizes the gradient through a plan: one dual plan per edge of
// D = {g_f > 0} (richer per-edge families may be supplied), combined with the
// summable normalizers and symmetrized so signed ratios reach the gradient
// from below and above. Both certificates are re-verified, not assumed.
inline RepresentingPlan representing_plan(const MetricGraph& g, const VertexFunction& f, double p,
                                          const ModulusOptions& opt = {},
                                          const std::map<int, CurveFamily>* richer = nullptr) {
  RepresentingPlan out;
  out.gf = minimal_weak_gradient(g, f, LocationKind::EdgePoint);
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (!out.gf.exceptional[e] && out.gf.g_exact[e] > 0) out.support.push_back(static_cast<int>(e));
  if (out.support.empty()) {
    out.note = "the gradient vanishes, so the empty plan represents it vacuously";
    out.dis.granularity = LocationKind::EdgePoint;
    return out;
  }

  const double q = p > 1 ? p / (p - 1) : std::numeric_limits<double>::infinity();
  std::vector<Plan> pieces;
  for (int e : out.support) {
    CurveFamily fam;
    if (richer && richer->count(e))
      fam = richer->at(e);
    else
      fam = CurveFamily::of_curves({Curve{{Step{e, true}}}});
    ModulusResult mr = mod_p(g, fam, p, opt);
    if (mr.is_zero || !(mr.value > 0))
      throw CheckError("representing_plan: the family through edge '" + g.edges[static_cast<std::size_t>(e)].id +
                       "' has zero modulus, which a single sigma-positive edge cannot");
    DualPlan dp = dual_plan(g, mr);
    const Barycenter b = barycenter(g, dp.plan);
    if (!(b.mass[static_cast<std::size_t>(e)] > 0))
      throw CheckError("representing_plan: supplied family misses edge '" +
                       g.edges[static_cast<std::size_t>(e)].id + "'");
    pieces.push_back(std::move(dp.plan));
  }
  CombineResult comb = combine_plans(g, pieces, q);
  out.combine_norm_bound = comb.norm_bound;
  out.plan = symmetrize_plan(comb.plan);
  out.dis = disintegrate(g, out.plan, LocationKind::EdgePoint);

  const Barycenter b = barycenter(g, out.plan);
  for (int e : out.support)
    if (!(b.mass[static_cast<std::size_t>(e)] > 0)) out.mu_abscont_on_support = false;

  for (int e : out.support) {
    auto it = out.dis.laws.find(edge_point(e));
    if (it == out.dis.laws.end()) {
      out.esssup_identity = false;
      out.identity_failures.push_back(e);
      continue;
    }
    Rational best;
    bool first = true;
    for (const auto& [t, pr] : it->second.records) {
      const Rational r = traversal_ratio(g, f, out.plan, t);
      if (first || r > best) best = r;
      first = false;
    }
    if (first || best != out.gf.g_exact[static_cast<std::size_t>(e)]) {
      out.esssup_identity = false;
      out.identity_failures.push_back(e);
    }
  }
  return out;
}

// ---- productive traversals ----

struct ProductiveSet {
  double eps = 0;
  LocationKind granularity = LocationKind::EdgePoint;
  Disintegration dis;
  std::map<Location, std::vector<Traversal>> members;  // B restricted to each conditional law
  std::map<Location, double> mass;                     // conditional mass pi_x(B)
  bool positive_on_support = true;                     // pi_x(B) > 0 wherever the gradient is positive
  std::vector<Location> failures;
};

// Traversals whose signed ratio lands in [(1 - eps) g_f, g_f]. The plan must
// be reversal-closed: the lower bound is one-sided, and only reversals
// guarantee that some traversal realizes the positive sign.
inline ProductiveSet epsilon_productive_set(const MetricGraph& g, const VertexFunction& f, const Plan& plan,
                                            double eps, LocationKind granularity = LocationKind::EdgePoint) {
  if (!(eps > 0) || !(eps < 1)) throw InputError("epsilon_productive_set: eps must lie in (0,1)");
  if (!plan_reversal_closed(plan))
    throw InputError("epsilon_productive_set: plan must be reversal-closed (symmetrize it first)");
  ProductiveSet out;
  out.eps = eps;
  out.granularity = granularity;
  out.dis = disintegrate(g, plan, granularity);
  const WeakGradient gf = minimal_weak_gradient(g, f, granularity);
  const Rational eps_x = rat_of(eps);
  for (const auto& [loc, law] : out.dis.laws) {
    const Rational& gx = gf.g_exact[static_cast<std::size_t>(loc.index)];
    const Rational lo = (Rational(1) - eps_x) * gx;
    std::vector<Traversal> b;
    double m = 0;
    for (const auto& [t, pr] : law.records) {
      const Rational r = traversal_ratio(g, f, plan, t);
      if (r >= lo && r <= gx) {
        b.push_back(t);
        m += pr;
      }
    }
    out.members[loc] = std::move(b);
    out.mass[loc] = m;
  }
  const std::size_t n = granularity == LocationKind::EdgePoint ? g.edge_count() : g.vertex_count();
  for (std::size_t i = 0; i < n; ++i) {
    if (gf.exceptional[i] || gf.g_exact[i] <= 0) continue;
    const Location loc = granularity == LocationKind::EdgePoint ? edge_point(static_cast<int>(i))
                                                                : vertex_star(static_cast<int>(i));
    auto it = out.mass.find(loc);
    if (it == out.mass.end() || !(it->second > 0)) {
      out.positive_on_support = false;
      out.failures.push_back(loc);
    }
  }
  return out;
}

// ---- falsification oracle ----

namespace detail {

// All nonempty simple curves over sigma-positive edges, emitted in
// lexicographic vertex-sequence order, each prefix included. Returns false if
// the budget cut the walk short.
inline bool enumerate_simple_positive(const MetricGraph& g, int max_steps, std::size_t budget,
                                      std::vector<Curve>& out) {
  struct Frame {
    int vertex;
    std::size_t next = 0;
  };
  for (std::size_t v0 = 0; v0 < g.vertex_count(); ++v0) {
    std::vector<char> used(g.vertex_count(), 0);
    Curve path;
    std::vector<Frame> stack;
    stack.push_back({static_cast<int>(v0)});
    used[v0] = 1;
    std::vector<std::vector<int>> inc(g.vertex_count());
    while (!stack.empty()) {
      Frame& fr = stack.back();
      if (inc[static_cast<std::size_t>(fr.vertex)].empty())
        inc[static_cast<std::size_t>(fr.vertex)] = ordered_incident(g, fr.vertex);
      const auto& edges = inc[static_cast<std::size_t>(fr.vertex)];
      bool advanced = false;
      while (fr.next < edges.size()) {
        const int e = edges[fr.next++];
        if (g.edges[static_cast<std::size_t>(e)].measure <= 0) continue;
        const int w = g.other_end(e, fr.vertex);
        if (used[static_cast<std::size_t>(w)]) continue;
        if (static_cast<int>(path.steps.size()) >= max_steps) continue;
        path.steps.push_back({e, g.edges[static_cast<std::size_t>(e)].u == fr.vertex});
        if (out.size() >= budget) return false;
        out.push_back(path);
        used[static_cast<std::size_t>(w)] = 1;
        stack.push_back({w});
        advanced = true;
        break;
      }
      if (!advanced) {
        used[static_cast<std::size_t>(fr.vertex)] = 0;
        stack.pop_back();
        if (!path.steps.empty()) path.steps.pop_back();
      }
    }
  }
  return true;
}

}  // namespace detail

struct ViolationSearch {
  enum class Outcome { Found, NoneExhaustive, BudgetExhausted };
  Outcome outcome = Outcome::NoneExhaustive;
  std::optional<Curve> witness;
  std::vector<Curve> violators;
  std::optional<Plan> plan;  // dual plan of the violating subfamily
  double subfamily_modulus = 0;
};

struct ViolationOptions {
  int max_steps = 20;
  std::size_t budget = 100000;
  ModulusOptions modulus;
};

// Searches for a curve along which the candidate fails the upper-gradient
// inequality |f(end) - f(start)| <= integral of the candidate. Comparisons
// are exact, so "violator" never means "rounding artifact". Only curves over
// sigma-positive edges count; the rest form a zero-modulus family.
inline ViolationSearch violating_plan(const MetricGraph& g, const VertexFunction& f, const WeakGradient& cand,
                                      double p, const ViolationOptions& opt = {}) {
  std::vector<Rational> edge_g(g.edge_count(), Rational(0));
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    if (cand.granularity == LocationKind::EdgePoint)
      edge_g[e] = cand.g_exact[e];
    else
      edge_g[e] = (cand.g_exact[static_cast<std::size_t>(g.edges[e].u)] +
                   cand.g_exact[static_cast<std::size_t>(g.edges[e].v)]) /
                  Rational(2);
  }
  std::vector<Curve> curves;
  const bool complete =
      detail::enumerate_simple_positive(g, std::min<int>(opt.max_steps, static_cast<int>(g.vertex_count())),
                                        opt.budget, curves);
  ViolationSearch out;
  for (const Curve& c : curves) {
    const Rational drop = rat_abs(f.at(curve_end(g, c)) - f.at(curve_start(g, c)));
    const Rational integral = line_integral<Rational>(g, edge_g, c);
    if (drop > integral) out.violators.push_back(c);
  }
  if (out.violators.empty()) {
    out.outcome = complete ? ViolationSearch::Outcome::NoneExhaustive : ViolationSearch::Outcome::BudgetExhausted;
    return out;
  }
  out.outcome = ViolationSearch::Outcome::Found;
  out.witness = out.violators.front();
  ModulusResult mr = mod_p(g, CurveFamily::of_curves(out.violators), p, opt.modulus);
  out.subfamily_modulus = mr.value;
  if (!mr.is_zero && mr.value > 0) out.plan = dual_plan(g, mr).plan;
  return out;
}

// Upper-gradient inequality along one curve, exact.
inline bool upper_gradient_holds(const MetricGraph& g, const VertexFunction& f, const WeakGradient& gf,
                                 const Curve& c) {
  std::vector<Rational> edge_g(g.edge_count(), Rational(0));
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (gf.granularity == LocationKind::EdgePoint)
      edge_g[e] = gf.g_exact[e];
    else
      edge_g[e] = (gf.g_exact[static_cast<std::size_t>(g.edges[e].u)] +
                   gf.g_exact[static_cast<std::size_t>(g.edges[e].v)]) /
                  Rational(2);
  return rat_abs(f.at(curve_end(g, c)) - f.at(curve_start(g, c))) <= line_integral<Rational>(g, edge_g, c);
}

// ---- Young stability ----

// Smallest slack delta such that near-equality in Young's inequality,
// a^p/p + b^q/q <= (1 + delta) a b, pins the ratio a^(p/q)/b within eps of 1.
// Direct evaluation of h(t) = t/p + t^(-q/p)/q at the band edges.
inline double young_delta(double eps, double p) {
  if (!(p > 1) || !std::isfinite(p)) throw InputError("young_delta: requires p in (1, infinity)");
  if (!(eps > 0) || !(eps < 1)) throw InputError("young_delta: requires eps in (0, 1)");
  const double q = p / (p - 1);
  auto h = [&](double t) { return t / p + std::pow(t, -q / p) / q; };
  return std::min(h(1 - eps), h(1 + eps)) - 1.0;
}

}  // namespace modgrad
