#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modgrad/family.hpp"
#include "modgrad/graph.hpp"
#include "modgrad/modulus.hpp"
#include "modgrad/rational.hpp"

namespace modgrad {

struct PlanAtom {
  Curve curve;
  double w = 0;
  Rational w_exact{};
};

// Finitely supported measure on curves. Weights are kept both as doubles and,
// when `exact` is set, as authoritative rationals (the doubles mirror them).
struct Plan {
  std::vector<PlanAtom> atoms;
  bool exact = false;

  double mass() const {
    double m = 0;
    for (const PlanAtom& a : atoms) m += a.w;
    return m;
  }
  Rational mass_exact() const {
    Rational m(0);
    for (const PlanAtom& a : atoms) m += a.w_exact;
    return m;
  }
};

// Canonical form: duplicate curves merged, nonpositive weights dropped, atoms
// sorted by curve.
inline Plan normalize_plan(Plan p) {
  std::map<Curve, PlanAtom> merged;
  for (PlanAtom& a : p.atoms) {
    auto [it, fresh] = merged.try_emplace(a.curve, a);
    if (!fresh) {
      it->second.w += a.w;
      it->second.w_exact += a.w_exact;
    }
  }
  Plan out;
  out.exact = p.exact;
  for (auto& [c, a] : merged) {
    if (p.exact ? (a.w_exact <= 0) : (a.w <= 0)) continue;
    if (p.exact) a.w = to_double(a.w_exact);
    out.atoms.push_back(std::move(a));
  }
  return out;
}

inline Plan make_plan(std::vector<std::pair<Curve, double>> weighted) {
  Plan p;
  for (auto& [c, w] : weighted) p.atoms.push_back({std::move(c), w, rat_of(w)});
  p.exact = true;  // dyadic embedding of explicit weights
  return normalize_plan(std::move(p));
}

// Pushforward of arc length: mass deposited on each edge, and its density
// against sigma where that is defined.
struct Barycenter {
  std::vector<double> mass;
  std::vector<double> density;  // infinity marks mass on a sigma-null edge
  std::vector<Rational> mass_exact;
  std::vector<Rational> density_exact;  // zero placeholder where sigma = 0
  bool exact = false;
  bool absolutely_continuous = true;
  std::vector<int> singular_edges;  // sigma-null edges carrying positive mass
};

inline Barycenter barycenter(const MetricGraph& g, const Plan& plan) {
  Barycenter b;
  b.exact = plan.exact;
  b.mass.assign(g.edge_count(), 0);
  b.density.assign(g.edge_count(), 0);
  b.mass_exact.assign(g.edge_count(), Rational(0));
  b.density_exact.assign(g.edge_count(), Rational(0));
  for (const PlanAtom& a : plan.atoms)
    for (const Step& s : a.curve.steps) {
      const std::size_t e = static_cast<std::size_t>(s.edge);
      b.mass[e] += a.w * g.edges[e].len;
      if (plan.exact) b.mass_exact[e] += a.w_exact * rat_of(g.edges[e].len);
    }
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const double sigma = g.edges[e].measure;
    if (sigma > 0) {
      b.density[e] = b.mass[e] / sigma;
      if (plan.exact) b.density_exact[e] = b.mass_exact[e] / rat_of(sigma);
    } else if (b.mass[e] > 0 || (plan.exact && b.mass_exact[e] > 0)) {
      b.density[e] = std::numeric_limits<double>::infinity();
      b.absolutely_continuous = false;
      b.singular_edges.push_back(static_cast<int>(e));
    }
  }
  return b;
}

// L^q norm of the barycenter density against the edge measure; q = infinity
// takes the max over sigma-positive edges.
inline double density_q_norm(const MetricGraph& g, const Barycenter& b, double q) {
  if (!b.absolutely_continuous) return std::numeric_limits<double>::infinity();
  if (std::isinf(q)) {
    double m = 0;
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      if (g.edges[e].measure > 0) m = std::max(m, b.density[e]);
    return m;
  }
  if (!(q >= 1)) throw InputError("density_q_norm: q must be >= 1 or infinity");
  double acc = 0;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (g.edges[e].measure > 0 && b.density[e] > 0)
      acc += g.edges[e].measure * std::pow(b.density[e], q);
  return std::pow(acc, 1.0 / q);
}

// Total traversal mass: every step of every atom carries w * l(e).
inline double plan_traversal_mass(const MetricGraph& g, const Plan& p) {
  double m = 0;
  for (const PlanAtom& a : p.atoms) m += a.w * curve_length(g, a.curve);
  return m;
}

inline Rational plan_traversal_mass_exact(const MetricGraph& g, const Plan& p) {
  Rational m(0);
  for (const PlanAtom& a : p.atoms) {
    Rational len(0);
    for (const Step& s : a.curve.steps) len += rat_of(g.edges[static_cast<std::size_t>(s.edge)].len);
    m += a.w_exact * len;
  }
  return m;
}

inline Plan reverse_plan(const Plan& p) {
  Plan r;
  r.exact = p.exact;
  for (const PlanAtom& a : p.atoms) r.atoms.push_back({reverse_curve(a.curve), a.w, a.w_exact});
  return normalize_plan(std::move(r));
}

inline Plan symmetrize_plan(const Plan& p) {
  Plan s = p;
  const Plan r = reverse_plan(p);
  s.atoms.insert(s.atoms.end(), r.atoms.begin(), r.atoms.end());
  return normalize_plan(std::move(s));
}

inline bool plan_reversal_closed(const Plan& p) {
  std::map<Curve, Rational> w;
  std::map<Curve, double> wd;
  for (const PlanAtom& a : p.atoms) {
    w[a.curve] = a.w_exact;
    wd[a.curve] = a.w;
  }
  for (const PlanAtom& a : p.atoms) {
    const Curve r = reverse_curve(a.curve);
    auto it = w.find(r);
    if (it == w.end()) return false;
    if (p.exact ? (it->second != a.w_exact) : (wd[r] != a.w)) return false;
  }
  return true;
}

// Plan mass charged to a family (atoms whose curve is a member).
inline double plan_mass_on_family(const MetricGraph& g, const CurveFamily& f, const Plan& p) {
  double m = 0;
  for (const PlanAtom& a : p.atoms)
    if (curve_in_family(g, f, a.curve)) m += a.w;
  return m;
}

// ---- dual plan ----

struct DualPlan {
  Plan plan;         // probability plan on the active curves
  double q = 2;      // conjugate exponent, infinity for p = 1
  double density_norm_q = 0;
  double kkt_link_residual = 0;  // distance from density proportional to rho^(p-1)
  bool exact = false;
  Barycenter bary;
};

// Normalized optimal multipliers as a plan with an L^q barycenter
// certificate. The multiplier system ties the barycenter density to
// rho^(p-1), which is re-verified here rather than trusted.
inline DualPlan dual_plan(const MetricGraph& g, const ModulusResult& res) {
  if (res.is_zero || res.value <= 0)
    throw InputError("dual_plan: the family has zero modulus, so no such plan is supported on it");
  if (res.active.empty()) throw InputError("dual_plan: no active multipliers recorded");
  DualPlan out;
  const double p = res.p;
  out.q = p > 1 ? p / (p - 1) : std::numeric_limits<double>::infinity();
  out.exact = res.exact_mode && res.exact_kkt;
  // The symbolic certificate for fractional exponents proves stationarity
  // without producing rational multipliers; weights stay floating point then.
  for (const ActiveCurve& a : res.active)
    if (a.lambda_exact <= 0) out.exact = false;

  double total = 0;
  Rational total_exact(0);
  for (const ActiveCurve& a : res.active) {
    total += a.lambda;
    if (out.exact) total_exact += a.lambda_exact;
  }
  if (!(total > 0)) throw InputError("dual_plan: multipliers sum to zero");
  Plan plan;
  plan.exact = out.exact;
  for (const ActiveCurve& a : res.active) {
    PlanAtom atom;
    atom.curve = a.curve;
    if (out.exact) {
      atom.w_exact = a.lambda_exact / total_exact;
      atom.w = to_double(atom.w_exact);
    } else {
      atom.w = a.lambda / total;
    }
    plan.atoms.push_back(std::move(atom));
  }
  out.plan = normalize_plan(std::move(plan));
  out.bary = barycenter(g, out.plan);
  out.density_norm_q = density_q_norm(g, out.bary, out.q);

  double resid = 0;
  if (p > 1) {
    // density(e) * total = p * rho(e)^(p-1) on edges carrying plan mass
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      if (out.bary.mass[e] <= 0 || g.edges[e].measure <= 0) continue;
      const double want = p * std::pow(res.rho[e], p - 1);
      const double got = out.bary.density[e] * total;
      resid = std::max(resid, std::abs(got - want) / std::max(std::abs(want), 1e-300));
    }
  } else {
    // p = 1: density * total <= 1 everywhere, equality where rho > 0
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      if (g.edges[e].measure <= 0) continue;
      const double scaled = out.bary.density[e] * total;
      resid = std::max(resid, std::max(0.0, scaled - 1.0));
      if (res.rho[e] > 0 && out.bary.mass[e] > 0) resid = std::max(resid, std::abs(scaled - 1.0));
    }
  }
  out.kkt_link_residual = resid;
  return out;
}

// ---- combination ----

struct CombineResult {
  Plan plan;
  std::vector<double> a;  // normalizers, one per input
  double norm_bound = 0;  // sum of 2^-n over used inputs; certified q-norm bound
  double tail_bound = 0;  // mass bound for the omitted countable tail, 2^-N
  std::string note;
};

// Weighted superposition sum_n 2^-n a_n^-1 eta_n with
// a_n = 1 + mass + ||d(eta_n)#/dmu||_q + traversal mass. Inputs must be
// absolutely continuous so the result keeps an L^q barycenter density.
inline CombineResult combine_plans(const MetricGraph& g, const std::vector<Plan>& plans, double q) {
  if (plans.empty()) throw InputError("combine_plans: need at least one plan");
  CombineResult out;
  out.note = "normalizers include the traversal mass term";
  bool exact = true;
  for (const Plan& p : plans) exact = exact && p.exact;
  Plan acc;
  acc.exact = exact;
  double scale = 0.5;
  Rational scale_exact(1, 2);
  for (std::size_t n = 0; n < plans.size(); ++n) {
    const Barycenter b = barycenter(g, plans[n]);
    if (!b.absolutely_continuous)
      throw InputError("combine_plans: input " + std::to_string(n + 1) +
                       " charges a sigma-null edge, so the combination has no L^q density");
    const double norm_q = density_q_norm(g, b, q);
    const double a_n = 1.0 + plans[n].mass() + norm_q + plan_traversal_mass(g, plans[n]);
    out.a.push_back(a_n);
    out.norm_bound += scale;
    Rational a_exact(0);
    if (exact)
      a_exact = Rational(1) + plans[n].mass_exact() + rat_of(norm_q) + plan_traversal_mass_exact(g, plans[n]);
    for (const PlanAtom& atom : plans[n].atoms) {
      PlanAtom scaled = atom;
      scaled.w = scale * atom.w / a_n;
      if (exact) scaled.w_exact = scale_exact * atom.w_exact / a_exact;
      acc.atoms.push_back(std::move(scaled));
    }
    scale /= 2;
    scale_exact /= 2;
  }
  out.tail_bound = scale * 2;  // first omitted coefficient
  out.plan = normalize_plan(std::move(acc));
  return out;
}

// ---- disintegration ----

struct Traversal {
  int atom = 0;
  int step = 0;
  bool forward = true;

  auto operator<=>(const Traversal&) const = default;
};

struct LocationLaw {
  double total = 0;  // pushforward mass e_*pi at this location
  Rational total_exact{};
  std::vector<std::pair<Traversal, double>> records;  // conditional probabilities, summing to 1
  std::vector<std::pair<Traversal, Rational>> records_exact;
};

struct Disintegration {
  LocationKind granularity = LocationKind::EdgePoint;
  std::map<Location, LocationLaw> laws;
  double pi_mass = 0;
  Rational pi_mass_exact{};
  bool exact = false;
};

// Splits the traversal measure (each step of mass w * l) over locations:
// a traversal sits inside one edge, or contributes half to each endpoint
// star. Conditional laws are normalized per location.
inline Disintegration disintegrate(const MetricGraph& g, const Plan& plan, LocationKind granularity) {
  Disintegration d;
  d.granularity = granularity;
  d.exact = plan.exact;
  std::map<Location, std::vector<std::pair<Traversal, Rational>>> buckets_exact;
  std::map<Location, std::vector<std::pair<Traversal, double>>> buckets;
  for (std::size_t ai = 0; ai < plan.atoms.size(); ++ai) {
    const PlanAtom& a = plan.atoms[ai];
    for (std::size_t si = 0; si < a.curve.steps.size(); ++si) {
      const Step& s = a.curve.steps[si];
      const std::size_t e = static_cast<std::size_t>(s.edge);
      const Traversal t{static_cast<int>(ai), static_cast<int>(si), s.forward};
      const double m = a.w * g.edges[e].len;
      const Rational mx = plan.exact ? Rational(a.w_exact * rat_of(g.edges[e].len)) : Rational(0);
      d.pi_mass += m;
      d.pi_mass_exact += mx;
      if (granularity == LocationKind::EdgePoint) {
        buckets[edge_point(s.edge)].push_back({t, m});
        if (plan.exact) buckets_exact[edge_point(s.edge)].push_back({t, mx});
      } else {
        for (int v : {g.edges[e].u, g.edges[e].v}) {
          buckets[vertex_star(v)].push_back({t, m / 2});
          if (plan.exact) buckets_exact[vertex_star(v)].push_back({t, mx / 2});
        }
      }
    }
  }
  for (auto& [loc, recs] : buckets) {
    LocationLaw law;
    for (auto& [t, m] : recs) law.total += m;
    if (!(law.total > 0)) continue;  // zero-mass locations stay undefined
    for (auto& [t, m] : recs) law.records.push_back({t, m / law.total});
    if (plan.exact) {
      for (auto& [t, m] : buckets_exact[loc]) law.total_exact += m;
      for (auto& [t, m] : buckets_exact[loc]) law.records_exact.push_back({t, m / law.total_exact});
    }
    d.laws.emplace(loc, std::move(law));
  }
  return d;
}

// Fubini reconstruction error: the location-weighted conditional mass of each
// traversal must rebuild its global mass. Exact plans return exactly zero.
inline double disintegration_fubini_residual(const MetricGraph& g, const Plan& plan, const Disintegration& d) {
  std::map<Traversal, double> rebuilt;
  std::map<Traversal, Rational> rebuilt_exact;
  for (const auto& [loc, law] : d.laws) {
    for (const auto& [t, pr] : law.records) rebuilt[t] += law.total * pr;
    if (d.exact)
      for (const auto& [t, pr] : law.records_exact) rebuilt_exact[t] += law.total_exact * pr;
  }
  double worst = 0;
  for (std::size_t ai = 0; ai < plan.atoms.size(); ++ai) {
    const PlanAtom& a = plan.atoms[ai];
    for (std::size_t si = 0; si < a.curve.steps.size(); ++si) {
      const Step& s = a.curve.steps[si];
      const Traversal t{static_cast<int>(ai), static_cast<int>(si), s.forward};
      const double want = a.w * g.edges[static_cast<std::size_t>(s.edge)].len;
      if (d.exact) {
        const Rational want_x = a.w_exact * rat_of(g.edges[static_cast<std::size_t>(s.edge)].len);
        auto it = rebuilt_exact.find(t);
        if (it == rebuilt_exact.end() || it->second != want_x) return std::numeric_limits<double>::infinity();
      }
      auto it = rebuilt.find(t);
      const double got = it == rebuilt.end() ? 0 : it->second;
      worst = std::max(worst, std::abs(got - want));
    }
  }
  return worst;
}

// Every conditional law must sit on traversals meeting its location.
inline bool disintegration_supported_correctly(const MetricGraph& g, const Plan& plan, const Disintegration& d) {
  for (const auto& [loc, law] : d.laws)
    for (const auto& [t, pr] : law.records) {
      const Step& s = plan.atoms[static_cast<std::size_t>(t.atom)].curve.steps[static_cast<std::size_t>(t.step)];
      if (loc.kind == LocationKind::EdgePoint) {
        if (s.edge != loc.index) return false;
      } else {
        const Edge& e = g.edges[static_cast<std::size_t>(s.edge)];
        if (e.u != loc.index && e.v != loc.index) return false;
      }
    }
  return true;
}

}  // namespace modgrad
