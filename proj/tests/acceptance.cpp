// Acceptance gate: ten end-to-end checks, one line of output each.
// Tolerances are pinned next to the checks; a nonzero exit means at least
// one line failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "modgrad/bundle.hpp"
#include "modgrad/generators.hpp"
#include "modgrad/rng.hpp"

#include "oracles.hpp"

using namespace modgrad;

namespace {

struct Checker {
  bool ok = true;
  std::string why;

  void require(bool cond, const std::string& msg) {
    if (cond || !ok) return;
    if (!cond && ok) {
      ok = false;
      why = msg;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

VertexFunction random_function(const MetricGraph& g, Rng& rng) {
  std::vector<Rational> vals(g.vertex_count());
  for (Rational& r : vals) r = rng.rational();
  return VertexFunction::of(g, [&vals](int v) { return vals[static_cast<std::size_t>(v)]; });
}

CurveFamily parallel_ends(const MetricGraph& g, int k, int m) {
  std::vector<int> from, to;
  for (int a = 0; a < k; ++a) {
    from.push_back(g.vertex("v" + std::to_string(a) + "_0"));
    to.push_back(g.vertex("v" + std::to_string(a) + "_" + std::to_string(m)));
  }
  return CurveFamily::connecting(std::move(from), std::move(to), m + 1);
}

Rational rat_pow_int(Rational base, int e) {
  Rational out(1);
  for (int i = 0; i < e; ++i) out *= base;
  return out;
}

// 1. Closed-form modulus on parallel paths, exact and float mode.
Checker criterion1() {
  Checker c;
  for (int k : {1, 2, 3})
    for (int m : {1, 2, 4})
      for (double p : {1.0, 1.5, 2.0, 3.0}) {
        const MetricGraph g = make_parallel_paths(k, m);
        const CurveFamily fam = parallel_ends(g, k, m);
        const std::string tag = "k=" + std::to_string(k) + " m=" + std::to_string(m) + " p=" + std::to_string(p);
        const double closed = k * std::pow(static_cast<double>(m), 1.0 - p);

        ModulusOptions ex;
        ex.exact = true;
        const ModulusResult res = mod_p(g, fam, p, ex);
        c.require(res.exact_feasible && res.exact_kkt, tag + ": exact certificate missing");
        if (p == 1.0 || p == 2.0 || p == 3.0) {
          const Rational want = Rational(k) / rat_pow_int(Rational(m), static_cast<int>(p) - 1);
          c.require(res.value_exact_valid && res.value_exact == want, tag + ": exact value mismatch");
        }
        if (p > 1.0) {
          // Strict convexity pins the unique optimum at 1/m on every edge.
          for (const Rational& r : res.rho_exact)
            c.require(r == Rational(1, m), tag + ": exact density is not 1/m");
        }
        c.require(std::abs(res.value - closed) <= 1e-8 * closed, tag + ": exact-mode float value off");

        const ModulusResult fl = mod_p(g, fam, p, ModulusOptions{});
        c.require(std::abs(fl.value - closed) <= 1e-8 * closed, tag + ": float value off by > 1e-8 rel");
      }
  return c;
}

// 2. Constraint generation agrees with the full-enumeration convex solve.
Checker criterion2() {
  Checker c;
  for (int n : {3, 4, 5})
    for (double p : {1.5, 2.0, 3.0}) {
      const MetricGraph g = make_grid(n, n, 1.0);
      const std::string tag = "grid n=" + std::to_string(n) + " p=" + std::to_string(p);

      const ModulusResult res = mod_p(g, crossing_family(g, 0), p, ModulusOptions{});
      c.require(res.duality_gap_rel <= 1e-6, tag + ": duality gap > 1e-6");
      c.require(res.kkt_residual <= 1e-6, tag + ": KKT residual > 1e-6");

      const auto paths = oracle::crossing_paths(g, oracle::coordinate_extreme_mask(g, 0, false),
                                                oracle::coordinate_extreme_mask(g, 0, true));
      const oracle::ConvexSolve full = oracle::full_convex_modulus(g, paths, p);
      c.require(std::abs(res.value - full.value) <= 1e-8 * full.value,
                tag + ": disagrees with full enumeration by > 1e-8 rel");
    }
  return c;
}

// 3 and 5 share instances: representing plans for random functions, then the
// productive sets of those plans.
struct PlanPair {
  Checker c3, c5;
  double t3 = 0, t5 = 0;
};

PlanPair criteria3and5() {
  PlanPair out;
  const std::vector<std::pair<std::string, MetricGraph>> spaces = {
      {"grid(4,4,1)", make_grid(4, 4, 1.0)},
      {"rug(4,4,1)", make_rug(4, 4, 1.0)},
      {"parallel(3,3)", make_parallel_paths(3, 3)}};
  Rng rng(305);
  ModulusOptions ex;
  ex.exact = true;
  for (const auto& [name, g] : spaces)
    for (int trial = 0; trial < 50; ++trial) {
      const VertexFunction f = random_function(g, rng);
      const std::string tag = name + " trial " + std::to_string(trial);

      const auto s3 = std::chrono::steady_clock::now();
      const RepresentingPlan rp = representing_plan(g, f, 2.0, ex);
      out.c3.require(rp.mu_abscont_on_support, tag + ": mu not dominated by the plan barycenter");
      out.c3.require(rp.esssup_identity && rp.identity_failures.empty(), tag + ": esssup identity broke");
      out.t3 += seconds_since(s3);

      const auto s5 = std::chrono::steady_clock::now();
      for (double eps : {1e-9, 0.1, 0.5}) {
        const ProductiveSet ps = epsilon_productive_set(g, f, rp.plan, eps);
        out.c5.require(ps.positive_on_support && ps.failures.empty(),
                       tag + ": pi_x(B) = 0 somewhere at eps=" + std::to_string(eps));
      }
      out.t5 += seconds_since(s5);
    }
  return out;
}

// 4. A density pushed below the gradient on one live edge is falsified; the
// gradient itself survives exhaustive search.
Checker criterion4() {
  Checker c;
  const MetricGraph g = make_grid(3, 3, 1.0);
  Rng rng(404);
  int done = 0, guard = 0;
  while (done < 50 && ++guard < 500) {
    const VertexFunction f = random_function(g, rng);
    const WeakGradient gf = minimal_weak_gradient(g, f, LocationKind::EdgePoint);
    int live = -1;
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      if (!gf.exceptional[e] && gf.g_exact[e] > 0) {
        live = static_cast<int>(e);
        break;
      }
    if (live < 0) continue;
    ++done;
    const std::string tag = "trial " + std::to_string(done);

    WeakGradient pert = gf;
    pert.g_exact[static_cast<std::size_t>(live)] *= Rational(999, 1000);
    pert.g[static_cast<std::size_t>(live)] = to_double(pert.g_exact[static_cast<std::size_t>(live)]);

    const ViolationSearch bad = violating_plan(g, f, pert, 2.0, ViolationOptions{});
    c.require(bad.outcome == ViolationSearch::Outcome::Found && bad.witness && bad.plan,
              tag + ": perturbed density was not falsified");

    const ViolationSearch good = violating_plan(g, f, gf, 2.0, ViolationOptions{});
    c.require(good.outcome == ViolationSearch::Outcome::NoneExhaustive,
              tag + ": exhaustive search did not clear the true gradient");
  }
  c.require(done == 50, "could not draw 50 usable random functions");
  return c;
}

// 6. Seminorm axioms and the independence index.
Checker criterion6() {
  Checker c;
  const MetricGraph g = make_grid(4, 4, 1.0);
  const VectorMap phi =
      make_vector_map({{"x", coordinate_function(g, 0)}, {"y", coordinate_function(g, 1)}});
  const CanonicalGradient cg = canonical_gradient(g, phi);

  Rng rng(606);
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    for (int t = 0; t < 1000; ++t) {
      const std::vector<Rational> xi = {rng.rational(), rng.rational()};
      const std::vector<Rational> zeta = {rng.rational(), rng.rational()};
      const Rational a = rng.rational_nonzero();
      const Rational lhs = cg.eval_exact(static_cast<int>(v), {a * xi[0], a * xi[1]});
      if (lhs != rat_abs(a) * cg.eval_exact(static_cast<int>(v), xi)) {
        c.require(false, "homogeneity broke at star " + g.vertex_ids[v]);
        return c;
      }
      const Rational sum = cg.eval_exact(static_cast<int>(v), {xi[0] + zeta[0], xi[1] + zeta[1]});
      if (sum > cg.eval_exact(static_cast<int>(v), xi) + cg.eval_exact(static_cast<int>(v), zeta)) {
        c.require(false, "triangle inequality broke at star " + g.vertex_ids[v]);
        return c;
      }
    }

  const IndependenceIndex idx = independence_index(g, cg);
  const double root_half = std::sqrt(0.5);
  for (int i = 1; i <= 2; ++i)
    for (int j = 1; j <= 2; ++j) {
      const int v = g.vertex("v" + std::to_string(i) + "_" + std::to_string(j));
      c.require(std::abs(idx.value[static_cast<std::size_t>(v)] - root_half) <= 1e-6,
                "interior independence index is not 1/sqrt(2) +- 1e-6");
    }

  const MetricGraph rug = make_rug(4, 4, 1.0);
  const VectorMap rphi =
      make_vector_map({{"x", coordinate_function(rug, 0)}, {"y", coordinate_function(rug, 1)}});
  const IndependenceIndex ridx = independence_index(rug, canonical_gradient(rug, rphi));
  for (std::size_t v = 0; v < rug.vertex_count(); ++v) {
    c.require(ridx.exact_zero[v] && ridx.value[v] == 0.0,
              "rug independence index for N=2 is not exactly zero at " + rug.vertex_ids[v]);
  }
  return c;
}

// 7. Differential recovery, calculus rules, refinement order.
Checker criterion7() {
  Checker c;
  const MetricGraph g = make_grid(4, 4, 1.0);
  const VertexFunction x = coordinate_function(g, 0);
  const VertexFunction y = coordinate_function(g, 1);
  const Atlas atlas = build_atlas(g, {{"x", x}, {"y", y}});
  if (atlas.charts.size() != 1) {
    c.require(false, "grid atlas did not come back as a single chart");
    return c;
  }
  const Chart& chart = atlas.charts[0];

  Rng rng(707);
  for (int t = 0; t < 100; ++t) {
    const Rational a = rng.rational(), b = rng.rational(), shift = rng.rational();
    const VertexFunction f =
        a * x + b * y + VertexFunction::of(g, [&shift](int) { return shift; });
    const Differential d = differential(g, chart, f);
    c.require(d.all_exact && d.max_residual == 0.0, "affine recovery left a residual");
    for (const auto& [v, at] : d.at)
      c.require(at.xi[0] == a && at.xi[1] == b, "recovered covector differs from xi0");
  }

  const LeibnizReport lz = leibniz_check(g, chart, x, y);
  c.require(lz.all_exact, "Leibniz rule not exact on the affine pair (x, y)");

  const VertexFunction lhs = polynomial_function(g, {{1.0, 1, 0}, {2.0, 0, 1}, {3.0, 0, 0}});
  const VertexFunction rhs = x + Rational(2) * y + VertexFunction::of(g, [](int) { return Rational(3); });
  const LocalityReport loc = locality_check(g, chart, lhs, rhs);
  c.require(loc.agreement_stars.size() == g.vertex_count() && loc.differentials_match,
            "locality: equal affine functions got different differentials");

  // x^2 on a fixed window with the mesh halved twice.
  std::vector<double> err;
  for (const auto& [n, h] : std::vector<std::pair<int, double>>{{3, 1.0}, {5, 0.5}, {9, 0.25}}) {
    const MetricGraph gh = make_grid(n, n, h);
    const VertexFunction xh = coordinate_function(gh, 0);
    const Atlas ah = build_atlas(gh, {{"x", xh}, {"y", coordinate_function(gh, 1)}});
    const Differential d = differential(gh, ah.charts[0], polynomial_function(gh, {{1.0, 2, 0}}));
    double worst = 0;
    for (const auto& [v, at] : d.at) {
      const Rational target = Rational(2) * xh.at(v);
      worst = std::max(worst, std::abs(to_double(at.xi[0] - target)));
      worst = std::max(worst, std::abs(to_double(at.xi[1])));
    }
    err.push_back(worst);
  }
  c.require(err[0] > 0 && err[1] > 0 && err[2] > 0, "refinement errors vanished unexpectedly");
  if (c.ok) {
    const double order01 = std::log2(err[0] / err[1]);
    const double order12 = std::log2(err[1] / err[2]);
    c.require(order01 >= 0.8 && order12 >= 0.8, "observed refinement order below 0.8");
  }
  return c;
}

// 8. Transitions, section norms, and the exponent comparison maps.
Checker criterion8() {
  Checker c;
  const MetricGraph g = make_grid(4, 4, 1.0);
  const VertexFunction x = coordinate_function(g, 0);
  const VertexFunction y = coordinate_function(g, 1);

  auto chart_of = [&](VectorMap phi) {
    Chart ch;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) ch.stars.push_back(static_cast<int>(v));
    ch.phi = std::move(phi);
    ch.cg = canonical_gradient(g, ch.phi);
    return ch;
  };
  const std::vector<Chart> charts = {
      chart_of(make_vector_map({{"x", x}, {"y", y}})),
      chart_of(make_vector_map({{"u", x + y}, {"v", x + Rational(-1) * y}})),
      chart_of(make_vector_map({{"s", Rational(2) * x}, {"t", y}}))};

  const TransitionReport trans = transitions(g, charts);
  c.require(trans.all_exact, "transition maps picked up residuals");
  c.require(trans.cocycle_exact && trans.cocycle_gap <= 1e-12, "cocycle gap above 1e-12");

  const VertexFunction f = Rational(2) * x + Rational(3) * y;
  const DifferentialSection ds = differential_section(g, charts, f, &trans);
  c.require(ds.all_exact && ds.compat.compatible, "affine differential section failed to glue");
  const WeakGradient gf = minimal_weak_gradient(g, f, LocationKind::VertexStar);
  for (const auto& [v, xi] : ds.section.by_chart[0])
    c.require(charts[0].cg.eval_exact(v, xi) == gf.g_exact[static_cast<std::size_t>(v)],
              "pointwise |df| differs from the star gradient");
  for (const double p : {1.5, 2.0, 3.0}) {
    const double a = section_norm(g, charts, ds.section, p, &trans);
    const double b = gradient_lp_norm(g, charts, f, p);
    c.require(std::abs(a - b) <= 1e-12 * std::max(1.0, b),
              "|df| and g_f disagree in L^p at p=" + std::to_string(p));
  }

  const std::vector<Chart> base = {charts[0]};
  Rng rng(808);
  const std::vector<VertexFunction> probes = {x, y, f, random_function(g, rng)};
  const BundleComparison c12 = pq_map(g, base, 1.5, 2.0, probes);
  const BundleComparison c23 = pq_map(g, base, 2.0, 3.0, probes);
  const BundleComparison c13 = pq_map(g, base, 1.5, 3.0, probes);
  for (const BundleComparison* m : {&c12, &c23, &c13}) {
    c.require(m->all_identity, "comparison map is not the identity");
    c.require(m->lipschitz_ok, "comparison map is not 1-Lipschitz on samples");
    c.require(m->surjective_ok, "comparison map missed a basis covector");
    c.require(m->intertwines_ok, "comparison map does not intertwine differentials");
  }
  c.require(pq_composes(c13, c12, c23), "composition law 1.5 -> 2 -> 3 broke");
  return c;
}

// 9. Chart dimensions, the zero-chart equivalence, and the Lipschitz gap.
Checker criterion9() {
  Checker c;
  const MetricGraph grid = make_grid(4, 4, 1.0);
  const Atlas ga = build_atlas(
      grid, {{"x", coordinate_function(grid, 0)}, {"y", coordinate_function(grid, 1)}});
  c.require(ga.charts.size() == 1 && ga.charts[0].dim() == 2 && ga.zero_dim_stars.empty() &&
                ga.uncovered.empty(),
            "grid atlas dimensions are not [2]");

  const MetricGraph rug = make_rug(4, 4, 1.0);
  const Atlas ra = build_atlas(
      rug, {{"x", coordinate_function(rug, 0)}, {"y", coordinate_function(rug, 1)}});
  c.require(ra.charts.size() == 1 && ra.charts[0].dim() == 1 && ra.zero_dim_stars.empty(),
            "rug atlas dimensions are not [1]");

  const MetricGraph dead = make_graph({"a", "b", "c"},
                                      {{"e0", 0, 1, 1.0, 0.0}, {"e1", 1, 2, 1.0, 0.0}}, {});
  const Atlas da = build_atlas(dead, {{"f", VertexFunction::of(dead, [](int v) { return Rational(v); })}});
  c.require(da.charts.empty() && da.zero_dim_stars.size() == 3,
            "all-null component did not collapse to the zero chart");

  // The zero chart and the zero-modulus certificate must agree in both
  // directions.
  std::vector<Location> dead_stars;
  for (std::size_t v = 0; v < dead.vertex_count(); ++v) dead_stars.push_back(vertex_star(static_cast<int>(v)));
  c.require(zero_chart_check(dead, dead_stars), "zero chart rejected on the all-null component");
  c.require(mod_zero_check(dead, CurveFamily::connecting({dead.vertex("a")}, {dead.vertex("c")}, 3)).is_zero,
            "all-null crossing family has positive modulus");

  std::vector<Location> grid_stars;
  for (std::size_t v = 0; v < grid.vertex_count(); ++v) grid_stars.push_back(vertex_star(static_cast<int>(v)));
  c.require(!zero_chart_check(grid, grid_stars), "zero chart accepted on the grid");
  c.require(!mod_zero_check(grid, crossing_family(grid, 0)).is_zero, "grid crossing family reported as null");

  const CheegerReport cheeger = cheeger_compare(rug, ra.charts, coordinate_function(rug, 1));
  c.require(cheeger.gap_stars == rug.vertex_count(), "Cheeger gap missing somewhere on the rug");
  for (const auto& [v, at] : cheeger.at)
    c.require(at.lip == Rational(1) && at.df_norm == Rational(0),
              "rug star does not certify Lip(y)=1 vs |Dy|_p=0");
  return c;
}

// 10. Near-equality in Young's inequality pins the ratio.
Checker criterion10() {
  Checker c;
  for (double p : {1.5, 2.0, 3.0})
    for (double eps : {0.05, 0.2}) {
      const double q = p / (p - 1);
      const double yd = young_delta(eps, p);
      const double delta = yd / (1.0 + yd);
      const std::string tag = "p=" + std::to_string(p) + " eps=" + std::to_string(eps);

      Rng rng(1010);
      long long hypothesis_hits = 0;
      for (long long i = 0; i < 1000000; ++i) {
        const double a = rng.uniform(1e-3, 10.0);
        // Half the draws hug the equality ratio so the hypothesis actually fires.
        const double s = (i % 2 == 0) ? rng.uniform(1.0 - 2.0 * eps, 1.0 + 2.0 * eps)
                                      : rng.uniform(0.05, 3.0);
        const double b = std::pow(a, p / q) * s;
        const double lhs = std::pow(a, p) / p + std::pow(b, q) / q;
        if (lhs > a * b / (1.0 - delta)) continue;
        ++hypothesis_hits;
        const double ratio = std::pow(a, p / q) / b;
        if (!(ratio >= (1.0 - eps) * (1.0 - 1e-12) && ratio <= (1.0 + eps) * (1.0 + 1e-12))) {
          c.require(false, tag + ": ratio escaped the band at a=" + std::to_string(a) +
                               " b=" + std::to_string(b));
          return c;
        }
      }
      c.require(hypothesis_hits > 100000, tag + ": hypothesis fired too rarely to test anything");
    }

  for (double eps : {1e-3, 0.05, 0.2, 0.5})
    c.require(std::abs(young_delta(eps, 2.0) - eps * eps / (2.0 * (1.0 + eps))) <= 1e-12,
              "p=2 closed form off by more than 1e-12");
  return c;
}

struct Line {
  int number;
  std::string label;
  Checker checker;
  double elapsed;
  double limit;  // seconds; 0 = no limit
};

}  // namespace

int main() {
  std::vector<Line> lines;
  auto run = [&](int number, const std::string& label, Checker (*fn)(), double limit) {
    const auto t0 = std::chrono::steady_clock::now();
    Checker c = fn();
    lines.push_back({number, label, std::move(c), seconds_since(t0), limit});
  };

  run(1, "closed-form modulus on parallel paths", criterion1, 1.0);
  run(2, "duality certificates vs full enumeration on grids", criterion2, 30.0);

  {
    PlanPair pp = criteria3and5();
    lines.push_back({3, "gradient representation by plans (rational mode)", std::move(pp.c3),
                     pp.t3, 60.0});
    lines.push_back({5, "productive sets have positive conditional mass", std::move(pp.c5),
                     pp.t5, 0.0});
  }
  run(4, "falsification of sub-gradient densities", criterion4, 0.0);

  run(6, "seminorm axioms and independence index", criterion6, 0.0);
  run(7, "differential recovery, calculus, refinement order", criterion7, 0.0);
  run(8, "transitions, section norms, exponent comparison", criterion8, 0.0);
  run(9, "chart dimensions and the Lipschitz gap", criterion9, 0.0);
  run(10, "Young near-equality pins the ratio", criterion10, 0.0);

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.number < b.number; });

  int failures = 0;
  for (Line& line : lines) {
    if (line.limit > 0 && line.elapsed > line.limit)
      line.checker.require(false, "runtime " + std::to_string(line.elapsed) + "s over the " +
                                      std::to_string(line.limit) + "s budget");
    const bool pass = line.checker.ok;
    failures += !pass;
    std::printf("[%s] criterion %2d: %s (%.2fs)%s%s\n", pass ? "PASS" : "FAIL", line.number,
                line.label.c_str(), line.elapsed, pass ? "" : ": ",
                pass ? "" : line.checker.why.c_str());
  }
  return failures == 0 ? 0 : 1;
}
