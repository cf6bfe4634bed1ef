#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "modgrad/charts.hpp"
#include "modgrad/generators.hpp"
#include "modgrad/rng.hpp"

#include "oracles.hpp"

using namespace modgrad;

namespace {

VectorMap coords_map(const MetricGraph& g) {
  return make_vector_map({{"x", coordinate_function(g, 0)}, {"y", coordinate_function(g, 1)}});
}

std::vector<std::pair<std::string, VertexFunction>> coords_pool(const MetricGraph& g) {
  return {{"x", coordinate_function(g, 0)}, {"y", coordinate_function(g, 1)}};
}

std::vector<Rational> rand_xi(Rng& rng, std::size_t n) {
  std::vector<Rational> xi(n);
  for (Rational& r : xi) r = rng.rational();
  return xi;
}

}  // namespace

TEST_CASE("canonical gradient evaluates the direction seminorm") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const CanonicalGradient cg = canonical_gradient(g, coords_map(g));
  const int center = g.vertex("v1_1");

  // W at the center is spanned by the two axis directions.
  CHECK(cg.eval_exact(center, {Rational(3), Rational(2)}) == Rational(3));
  CHECK(cg.eval_exact(center, {Rational(-1), Rational(5)}) == Rational(5));
  CHECK(cg.eval(center, {1.0, 1.0}) == Catch::Approx(1.0));

  const MetricGraph rug = make_rug(3, 3, 1.0);
  const CanonicalGradient rcg = canonical_gradient(rug, coords_map(rug));
  // Null verticals vanish from W, so the y component is invisible.
  CHECK(rcg.eval_exact(rug.vertex("v1_1"), {Rational(0), Rational(7)}) == Rational(0));
  CHECK(rcg.eval_exact(rug.vertex("v1_1"), {Rational(2), Rational(7)}) == Rational(2));
}

TEST_CASE("contractions recover the per-direction minimal gradient") {
  const MetricGraph g = make_grid(4, 4, 1.0);
  const VectorMap phi = coords_map(g);
  const CanonicalGradient cg = canonical_gradient(g, phi);
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Rational> xi = rand_xi(rng, 2);
    const WeakGradient w = minimal_weak_gradient(g, contract(g, phi, xi), LocationKind::VertexStar);
    for (std::size_t v = 0; v < g.vertex_count(); ++v)
      CHECK(cg.eval_exact(static_cast<int>(v), xi) == w.g_exact[v]);
  }
}

TEST_CASE("a supporting plan restricts the direction set") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Curve row{{{g.edge("eh0_1"), true}, {g.edge("eh1_1"), true}}};
  const Plan p = make_plan({{row, 1.0}});
  const CanonicalGradient cg = canonical_gradient(g, coords_map(g), &p);

  CHECK(cg.stars[static_cast<std::size_t>(g.vertex("v1_1"))].edges.size() == 2);
  CHECK(cg.stars[static_cast<std::size_t>(g.vertex("v1_0"))].edges.empty());
  // Vertical directions disappear even on the supported row.
  CHECK(cg.eval_exact(g.vertex("v1_1"), {Rational(0), Rational(1)}) == Rational(0));
}

TEST_CASE("the seminorm axioms hold exactly") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const CanonicalGradient cg = canonical_gradient(g, coords_map(g));
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int v = static_cast<int>(rng.index(g.vertex_count()));
    const std::vector<Rational> xi = rand_xi(rng, 2);
    const std::vector<Rational> zeta = rand_xi(rng, 2);
    const Rational lam = rng.rational();

    const std::vector<Rational> scaled = {lam * xi[0], lam * xi[1]};
    CHECK(cg.eval_exact(v, scaled) == rat_abs(lam) * cg.eval_exact(v, xi));

    const std::vector<Rational> sum = {xi[0] + zeta[0], xi[1] + zeta[1]};
    CHECK(cg.eval_exact(v, sum) <= cg.eval_exact(v, xi) + cg.eval_exact(v, zeta));
  }
}

TEST_CASE("the seminorm is Lipschitz in the covector") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const VectorMap phi = coords_map(g);
  const CanonicalGradient cg = canonical_gradient(g, phi);

  double lip = 0;
  for (std::size_t k = 0; k < phi.dim(); ++k) {
    double worst = 0;
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      worst = std::max(worst, std::abs(phi.components[k].slope_d(g, static_cast<int>(e))));
    lip += worst;
  }

  Rng rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    const int v = static_cast<int>(rng.index(g.vertex_count()));
    const std::vector<double> xi = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const std::vector<double> zeta = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const double lhs = std::abs(cg.eval(v, xi) - cg.eval(v, zeta));
    const double dist = std::hypot(xi[0] - zeta[0], xi[1] - zeta[1]);
    CHECK(lhs <= lip * dist + 1e-12);
  }
}

TEST_CASE("independence index on the grid and the rug") {
  const MetricGraph g = make_grid(4, 4, 1.0);
  const IndependenceIndex gi = independence_index(g, canonical_gradient(g, coords_map(g)));
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    CHECK(gi.rank[v] == 2);
    CHECK_FALSE(gi.exact_zero[v]);
    CHECK(gi.value[v] == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
  }

  const MetricGraph rug = make_rug(4, 4, 1.0);
  const IndependenceIndex ri = independence_index(rug, canonical_gradient(rug, coords_map(rug)));
  for (std::size_t v = 0; v < rug.vertex_count(); ++v) {
    CHECK(ri.rank[v] == 1);
    CHECK(ri.value[v] == 0.0);
    CHECK(static_cast<bool>(ri.exact_zero[v]));
  }
}

TEST_CASE("independence of a skewed map matches a dense direction scan") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const VertexFunction skew = polynomial_function(g, {{1.0, 1, 0}, {0.1, 0, 1}});  // x + y/10
  const VectorMap phi = make_vector_map({{"x", coordinate_function(g, 0)}, {"s", skew}});
  const CanonicalGradient cg = canonical_gradient(g, phi);
  const IndependenceIndex ii = independence_index(g, cg);

  const int center = g.vertex("v1_1");
  REQUIRE(ii.rank[static_cast<std::size_t>(center)] == 2);

  std::vector<std::array<double, 2>> dirs;
  for (const auto& w : cg.stars[static_cast<std::size_t>(center)].w_d) dirs.push_back({w[0], w[1]});
  const double brute = oracle::dense_direction_scan2(dirs);
  CHECK(ii.value[static_cast<std::size_t>(center)] == Catch::Approx(brute).margin(1e-4));
}

TEST_CASE("three-dimensional independence via the sampled sphere") {
  // Star with three orthonormal image directions.
  MetricGraph g = make_graph({"a", "b", "c", "d"},
                             {{"e1", 0, 1, 1.0, 1.0}, {"e2", 0, 2, 1.0, 1.0}, {"e3", 0, 3, 1.0, 1.0}});
  auto basis = [&](int target) {
    VertexFunction f = VertexFunction::zero(g);
    f.values[static_cast<std::size_t>(target)] = Rational(1);
    f.values_d[static_cast<std::size_t>(target)] = 1.0;
    return f;
  };
  const VectorMap phi = make_vector_map({{"u", basis(1)}, {"v", basis(2)}, {"w", basis(3)}});
  const IndependenceIndex ii = independence_index(g, canonical_gradient(g, phi));
  CHECK(ii.rank[0] == 3);
  CHECK(ii.value[0] == Catch::Approx(1.0 / std::sqrt(3.0)).margin(1e-6));
}

TEST_CASE("zero charts coincide with zero-modulus neighborhoods") {
  const MetricGraph rug = make_rug(3, 3, 1.0);
  std::vector<Location> nulls, mixed;
  for (std::size_t e = 0; e < rug.edge_count(); ++e) {
    if (rug.edge_is_null(static_cast<int>(e))) nulls.push_back(edge_point(static_cast<int>(e)));
    mixed.push_back(edge_point(static_cast<int>(e)));
  }
  CHECK(zero_chart_check(rug, nulls));
  CHECK_FALSE(zero_chart_check(rug, mixed));
  CHECK_FALSE(zero_chart_check(rug, {vertex_star(rug.vertex("v1_1"))}));
}

TEST_CASE("atlas construction on the standard spaces") {
  const MetricGraph g = make_grid(4, 4, 1.0);
  const Atlas ga = build_atlas(g, coords_pool(g));
  REQUIRE(ga.charts.size() == 1);
  CHECK(ga.charts[0].dim() == 2);
  CHECK(ga.charts[0].stars.size() == g.vertex_count());
  CHECK(ga.zero_dim_stars.empty());
  CHECK(ga.uncovered.empty());
  CHECK(ga.warnings.empty());

  const MetricGraph rug = make_rug(4, 4, 1.0);
  const Atlas ra = build_atlas(rug, coords_pool(rug));
  REQUIRE(ra.charts.size() == 1);
  CHECK(ra.charts[0].dim() == 1);
  CHECK(ra.charts[0].phi.names == std::vector<std::string>{"x"});
  CHECK(ra.charts[0].stars.size() == rug.vertex_count());
  CHECK(ra.warnings.empty());
}

TEST_CASE("atlas of a union matches the per-component dimensions") {
  const MetricGraph u = make_disjoint_union(make_grid(3, 3, 1.0), make_rug(3, 3, 1.0), "g.", "r.", 4.0, 0.0);
  const Atlas atlas = build_atlas(u, coords_pool(u));
  REQUIRE(atlas.charts.size() == 2);
  CHECK(atlas.charts[0].dim() == 2);
  CHECK(atlas.charts[1].dim() == 1);
  CHECK(atlas.charts[0].stars.size() == 9);
  CHECK(atlas.charts[1].stars.size() == 9);
  CHECK(atlas.uncovered.empty());
}

TEST_CASE("fully null neighborhoods form the zero-dimensional chart") {
  const MetricGraph g = make_graph({"a", "b", "c"}, {{"e1", 0, 1, 1.0, 0.0}, {"e2", 1, 2, 1.0, 0.0}});
  const Atlas atlas = build_atlas(g, {{"x", VertexFunction::of(g, [](int v) { return Rational(v); })}});
  CHECK(atlas.charts.empty());
  CHECK(atlas.zero_dim_stars.size() == 3);
  CHECK(atlas.uncovered.empty());
  CHECK(zero_chart_check(g, {edge_point(0), edge_point(1)}));
  CHECK(mod_zero_check(g, CurveFamily::of_curves({Curve{{{0, true}}}})).is_zero);
}

TEST_CASE("differential of an affine function is the coefficient covector") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Chart chart = build_atlas(g, coords_pool(g)).charts.at(0);
  const VertexFunction f = polynomial_function(g, {{2.0, 1, 0}, {3.0, 0, 1}, {7.0, 0, 0}});
  const Differential df = differential(g, chart, f);

  CHECK(df.all_exact);
  CHECK(df.max_residual == 0.0);
  for (int v : chart.stars) {
    const DifferentialAt& at = df.at.at(v);
    CHECK(at.xi == std::vector<Rational>{Rational(2), Rational(3)});
    CHECK(at.residual == Rational(0));
    CHECK(at.norm == Rational(3));
    CHECK(at.gf == Rational(3));
    CHECK(at.norm_matches_gradient);
  }
}

TEST_CASE("random covectors are recovered exactly from their contractions") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Chart chart = build_atlas(g, coords_pool(g)).charts.at(0);
  Rng rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<Rational> xi0 = rand_xi(rng, 2);
    VertexFunction f = contract(g, chart.phi, xi0);
    const Rational shift = rng.rational();
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
      f.values[v] += shift;
      f.values_d[v] = to_double(f.values[v]);
    }
    const Differential df = differential(g, chart, f);
    REQUIRE(df.all_exact);
    for (int v : chart.stars) CHECK(df.at.at(v).xi == xi0);
  }
}

TEST_CASE("inconsistent slope data falls back to the minimax covector") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Chart chart = build_atlas(g, coords_pool(g)).charts.at(0);
  const VertexFunction f = polynomial_function(g, {{1.0, 2, 0}});  // x^2
  const Differential df = differential(g, chart, f);

  CHECK_FALSE(df.all_exact);
  const int center = g.vertex("v1_1");
  const DifferentialAt& at = df.at.at(center);
  // Slopes 3 east and 1 west center at 2 with residual 1; the vertical
  // coefficient is free within the residual band, and the lexicographic
  // tie-break drives it to its least feasible value -1.
  CHECK(at.xi == std::vector<Rational>{Rational(2), Rational(-1)});
  CHECK(at.residual == Rational(1));
  CHECK_FALSE(at.norm_matches_gradient);
}

TEST_CASE("differentials are linear under the deterministic tie-break") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Chart chart = build_atlas(g, coords_pool(g)).charts.at(0);
  const VertexFunction f = polynomial_function(g, {{1.0, 2, 0}});
  const VertexFunction h = coordinate_function(g, 1);

  const Differential df = differential(g, chart, f);
  const Differential dh = differential(g, chart, h);
  const Differential combo = differential(g, chart, Rational(2) * f + Rational(-3) * h);
  for (int v : chart.stars) {
    const auto& c = combo.at.at(v).xi;
    const auto& a = df.at.at(v).xi;
    const auto& b = dh.at.at(v).xi;
    for (std::size_t k = 0; k < 2; ++k) CHECK(c[k] == Rational(2) * a[k] + Rational(-3) * b[k]);
  }
}

TEST_CASE("differential refinement converges to the continuum gradient") {
  // f = x^2 has continuum differential (2x, 0); the discrete minimax hits it
  // exactly at interior stars and misses by h on the boundary columns.
  double prev_err = 0;
  for (const double h : {1.0, 0.5, 0.25}) {
    const MetricGraph g = make_grid(3, 3, h);
    const Chart chart = build_atlas(g, coords_pool(g)).charts.at(0);
    const Differential df = differential(g, chart, polynomial_function(g, {{1.0, 2, 0}}));
    double err = 0;
    for (int v : chart.stars) {
      const double x = g.coords.at(g.vertex_ids[static_cast<std::size_t>(v)])[0];
      const auto& xi = df.at.at(v).xi_d;
      err = std::max(err, std::hypot(xi[0] - 2 * x, xi[1]));
    }
    CHECK(err == Catch::Approx(h));
    if (prev_err > 0) CHECK(err <= 0.55 * prev_err);
    prev_err = err;
  }
}

TEST_CASE("product rule holds within the residual budget") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Chart chart = build_atlas(g, coords_pool(g)).charts.at(0);
  const VertexFunction fx = coordinate_function(g, 0);
  const VertexFunction fy = coordinate_function(g, 1);

  const LeibnizReport bilinear = leibniz_check(g, chart, fx, fy);
  CHECK(bilinear.all_within);
  CHECK(bilinear.all_exact);
  for (const auto& [v, at] : bilinear.at) CHECK(at.gap == Rational(0));

  // d(x^3) = (4, -3) and x dx^2 + x^2 dx = (3, -1) at the center under the
  // tie-break, so the defect covector is (1, -2) with seminorm 2.
  const LeibnizReport cubic = leibniz_check(g, chart, fx, polynomial_function(g, {{1.0, 2, 0}}));
  CHECK(cubic.all_within);
  CHECK_FALSE(cubic.all_exact);
  CHECK(cubic.at.at(g.vertex("v1_1")).gap == Rational(2));
}

TEST_CASE("locality: equal functions share their differential") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Chart chart = build_atlas(g, coords_pool(g)).charts.at(0);
  const VertexFunction f = coordinate_function(g, 0);
  VertexFunction h = f;
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    if (g.coords.at(g.vertex_ids[v])[0] == 2.0) {
      h.values[v] += Rational(5);
      h.values_d[v] = to_double(h.values[v]);
    }

  const LocalityReport rep = locality_check(g, chart, f, h);
  CHECK(rep.differentials_match);
  // Only the west column's stars avoid the modified column entirely.
  REQUIRE(rep.agreement_stars.size() == 3);
  for (int v : rep.agreement_stars) CHECK(g.coords.at(g.vertex_ids[static_cast<std::size_t>(v)])[0] == 0.0);
}

TEST_CASE("chain rule through the vertical collapse of the rug") {
  const MetricGraph rug = make_rug(3, 3, 1.0);
  const MetricGraph path = make_parallel_paths(1, 2);
  const Chart chart_s = build_atlas(rug, coords_pool(rug)).charts.at(0);
  const Chart chart_t = build_atlas(path, {{"t", coordinate_function(path, 0)}}).charts.at(0);

  GraphMap F;
  F.to_vertex.resize(rug.vertex_count());
  for (std::size_t v = 0; v < rug.vertex_count(); ++v) {
    const int xi = static_cast<int>(rug.coords.at(rug.vertex_ids[v])[0]);
    F.to_vertex[v] = path.vertex("v0_" + std::to_string(xi));
  }

  VertexFunction h = coordinate_function(path, 0);
  const ChainRuleReport rep = chain_rule_check(rug, chart_s, F, path, chart_t, h);
  CHECK(rep.measure_compatible);
  CHECK(rep.compat_constant == Catch::Approx(1.5));  // three rows of sigma 1/2 per image edge
  CHECK(rep.exact);
  CHECK(rep.max_residual == Rational(0));
  CHECK(rep.skipped.empty());
}

TEST_CASE("chain rule rejects maps that charge null targets") {
  const MetricGraph grid = make_grid(2, 2, 1.0);
  const MetricGraph rug = make_rug(2, 2, 1.0);
  const Chart cs = build_atlas(grid, coords_pool(grid)).charts.at(0);
  const Chart ct = build_atlas(rug, coords_pool(rug)).charts.at(0);

  GraphMap ident;
  ident.to_vertex.resize(grid.vertex_count());
  for (std::size_t v = 0; v < grid.vertex_count(); ++v) ident.to_vertex[v] = rug.vertex(grid.vertex_ids[v]);

  CHECK_THROWS_AS(chain_rule_check(grid, cs, ident, rug, ct, coordinate_function(rug, 0)), InputError);

  GraphMap bad;
  bad.to_vertex = {0};
  CHECK_THROWS_AS(chain_rule_check(grid, cs, bad, rug, ct, coordinate_function(rug, 0)), InputError);
}
