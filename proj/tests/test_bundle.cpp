#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "modgrad/bundle.hpp"
#include "modgrad/generators.hpp"
#include "modgrad/rng.hpp"

using namespace modgrad;

namespace {

std::vector<int> all_stars(const MetricGraph& g) {
  std::vector<int> out(g.vertex_count());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = static_cast<int>(v);
  return out;
}

Chart make_chart(const MetricGraph& g, VectorMap phi, std::vector<int> stars) {
  Chart c;
  c.stars = std::move(stars);
  c.phi = std::move(phi);
  c.cg = canonical_gradient(g, c.phi);
  return c;
}

VectorMap coords_map(const MetricGraph& g) {
  return make_vector_map({{"x", coordinate_function(g, 0)}, {"y", coordinate_function(g, 1)}});
}

std::vector<std::pair<std::string, VertexFunction>> coords_pool(const MetricGraph& g) {
  return {{"x", coordinate_function(g, 0)}, {"y", coordinate_function(g, 1)}};
}

bool matrix_is(const std::vector<std::vector<Rational>>& m,
               const std::vector<std::vector<Rational>>& want) {
  if (m.size() != want.size()) return false;
  for (std::size_t r = 0; r < m.size(); ++r) {
    if (m[r].size() != want[r].size()) return false;
    for (std::size_t c = 0; c < m[r].size(); ++c)
      if (m[r][c] != want[r][c]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("transitions between linear reparametrizations are exact isometries") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const VertexFunction x = coordinate_function(g, 0);
  const VertexFunction y = coordinate_function(g, 1);

  const Chart c1 = make_chart(g, coords_map(g), all_stars(g));
  const Chart c2 = make_chart(g, make_vector_map({{"u", x + y}, {"v", x + Rational(-1) * y}}), all_stars(g));
  const Chart c3 = make_chart(g, make_vector_map({{"s", Rational(2) * x}, {"t", y}}), all_stars(g));

  const TransitionReport rep = transitions(g, {c1, c2, c3});
  CHECK(rep.all_exact);
  CHECK(rep.cocycle_exact);
  CHECK(rep.cocycle_gap == 0.0);
  // Every star appears in all six ordered triples of the three charts.
  CHECK(rep.triple_overlaps == 6 * g.vertex_count());

  const int center = g.vertex("v1_1");

  // x = (u + v) / 2 and y = (u - v) / 2, so dx and dy pick up the half coefficients.
  const TransitionAt* t12 = rep.find(0, 1, center);
  REQUIRE(t12 != nullptr);
  CHECK(t12->exact);
  CHECK(t12->isometry_exact);
  CHECK(matrix_is(t12->matrix, {{Rational(1, 2), Rational(1, 2)}, {Rational(1, 2), Rational(-1, 2)}}));

  const TransitionAt* t13 = rep.find(0, 2, center);
  REQUIRE(t13 != nullptr);
  CHECK(matrix_is(t13->matrix, {{Rational(1, 2), Rational(0)}, {Rational(0), Rational(1)}}));

  // Round trip composes to the identity.
  const TransitionAt* t21 = rep.find(1, 0, center);
  REQUIRE(t21 != nullptr);
  std::vector<std::vector<Rational>> prod(2, std::vector<Rational>(2, Rational(0)));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 2; ++k) prod[r][c] += t21->matrix[r][k] * t12->matrix[k][c];
  CHECK(matrix_is(prod, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}}));
}

TEST_CASE("identical charts transition by the identity matrix") {
  const MetricGraph g = make_grid(2, 2, 1.0);
  const Chart c1 = make_chart(g, coords_map(g), all_stars(g));
  const Chart c2 = make_chart(g, coords_map(g), all_stars(g));

  const TransitionReport rep = transitions(g, {c1, c2});
  CHECK(rep.all_exact);
  CHECK(rep.overlap_stars > 0);
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const TransitionAt* ta = rep.find(0, 1, static_cast<int>(v));
    REQUIRE(ta != nullptr);
    CHECK(matrix_is(ta->matrix, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}}));
    CHECK(ta->isometry_exact);
  }
}

TEST_CASE("overlapping charts of different dimension are rejected") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Chart c1 = make_chart(g, coords_map(g), all_stars(g));
  const Chart flat = make_chart(g, make_vector_map({{"x", coordinate_function(g, 0)}}), all_stars(g));
  CHECK_THROWS_AS(transitions(g, {c1, flat}), CheckError);
}

TEST_CASE("disjoint charts have nothing to reconcile") {
  const MetricGraph grid = make_grid(3, 3, 1.0);
  const MetricGraph rug = make_rug(3, 3, 1.0);
  const MetricGraph u = make_disjoint_union(grid, rug, "a.", "b.", 10.0, 0.0);
  const Atlas atlas = build_atlas(u, coords_pool(u));
  REQUIRE(atlas.charts.size() == 2);

  const TransitionReport rep = transitions(u, atlas.charts);
  CHECK(rep.overlap_stars == 0);
  CHECK(rep.all_exact);
  CHECK(rep.cocycle_exact);
}

TEST_CASE("differential sections glue exactly for affine functions") {
  const MetricGraph g = make_grid(2, 2, 1.0);
  const VertexFunction x = coordinate_function(g, 0);
  const VertexFunction y = coordinate_function(g, 1);
  const VertexFunction f = Rational(2) * x + Rational(3) * y;

  const Chart c1 = make_chart(g, coords_map(g), all_stars(g));
  const Chart c2 = make_chart(g, make_vector_map({{"u", x + y}, {"v", x + Rational(-1) * y}}), all_stars(g));
  const std::vector<Chart> charts = {c1, c2};
  const TransitionReport trans = transitions(g, charts);

  const DifferentialSection ds = differential_section(g, charts, f, &trans);
  CHECK(ds.all_exact);
  CHECK(ds.max_residual == 0.0);
  CHECK(ds.compat.compatible);
  CHECK(ds.compat.exact);

  // In the first chart the covector is (2, 3) at every star.
  for (const auto& [v, xi] : ds.section.by_chart[0]) {
    REQUIRE(xi.size() == 2);
    CHECK(xi[0] == Rational(2));
    CHECK(xi[1] == Rational(3));
  }
  // In the rotated chart f = (5u - v) / 2.
  for (const auto& [v, xi] : ds.section.by_chart[1]) {
    CHECK(xi[0] == Rational(5, 2));
    CHECK(xi[1] == Rational(-1, 2));
  }
}

TEST_CASE("section norm matches the gradient norm for affine functions") {
  const MetricGraph g = make_grid(2, 2, 1.0);
  const VertexFunction x = coordinate_function(g, 0);
  const VertexFunction y = coordinate_function(g, 1);
  const std::vector<Chart> charts = {make_chart(g, coords_map(g), all_stars(g))};
  const TransitionReport trans = transitions(g, charts);

  // f = x has unit slope everywhere, so the norm is the total measure to the 1/p.
  const DifferentialSection dx = differential_section(g, charts, x, &trans);
  for (const double p : {1.0, 1.5, 2.0, 3.0}) {
    const double want = std::pow(g.total_measure(), 1.0 / p);
    CHECK(section_norm(g, charts, dx.section, p, &trans) == Catch::Approx(want).epsilon(1e-12));
    CHECK(gradient_lp_norm(g, charts, x, p) == Catch::Approx(want).epsilon(1e-12));
  }
  CHECK(section_norm(g, charts, dx.section, std::numeric_limits<double>::infinity()) == 1.0);

  const VertexFunction f = Rational(2) * x + Rational(3) * y;
  const DifferentialSection df = differential_section(g, charts, f, &trans);
  for (const double p : {1.0, 2.0, 4.0}) {
    const double a = section_norm(g, charts, df.section, p, &trans);
    const double b = gradient_lp_norm(g, charts, f, p);
    CHECK(a == Catch::Approx(b).epsilon(1e-12));
    CHECK(a == Catch::Approx(3.0 * std::pow(g.total_measure(), 1.0 / p)).epsilon(1e-12));
  }
}

TEST_CASE("section norm is indifferent to how stars are grouped into charts") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const VertexFunction x = coordinate_function(g, 0);
  const VertexFunction y = coordinate_function(g, 1);
  const VertexFunction f = x + Rational(2) * y;

  const std::vector<Chart> whole = {make_chart(g, coords_map(g), all_stars(g))};

  std::vector<int> left, right;
  for (int v : all_stars(g)) (v % 2 == 0 ? left : right).push_back(v);
  const std::vector<Chart> split = {make_chart(g, coords_map(g), left),
                                    make_chart(g, coords_map(g), right)};

  const DifferentialSection a = differential_section(g, whole, f);
  const DifferentialSection b = differential_section(g, split, f);
  for (const double p : {1.0, 2.0, 3.0})
    CHECK(section_norm(g, whole, a.section, p) ==
          Catch::Approx(section_norm(g, split, b.section, p)).epsilon(1e-12));
}

TEST_CASE("zero sections have zero norm") {
  const MetricGraph g = make_grid(2, 2, 1.0);
  const std::vector<Chart> charts = {make_chart(g, coords_map(g), all_stars(g))};
  Section zero;
  zero.by_chart.resize(1);
  for (int v : charts[0].stars) zero.by_chart[0][v] = {Rational(0), Rational(0)};
  CHECK(section_norm(g, charts, zero, 2.0) == 0.0);
  CHECK(section_norm(g, charts, zero, std::numeric_limits<double>::infinity()) == 0.0);
}

TEST_CASE("incompatible sections are caught and named") {
  const MetricGraph g = make_grid(2, 2, 1.0);
  const VertexFunction x = coordinate_function(g, 0);
  const VertexFunction y = coordinate_function(g, 1);
  const Chart c1 = make_chart(g, coords_map(g), all_stars(g));
  const Chart c2 = make_chart(g, make_vector_map({{"u", x + y}, {"v", x + Rational(-1) * y}}), all_stars(g));
  const std::vector<Chart> charts = {c1, c2};
  const TransitionReport trans = transitions(g, charts);

  DifferentialSection ds = differential_section(g, charts, x, &trans);
  Section bad = ds.section;
  const int victim = g.vertex("v1_1");
  bad.by_chart[1][victim][0] += Rational(1);

  const SectionCompat compat = check_section(g, charts, trans, bad);
  CHECK_FALSE(compat.compatible);
  CHECK_FALSE(compat.exact);
  REQUIRE(compat.mismatch_star.has_value());
  CHECK(*compat.mismatch_star == "v1_1");

  CHECK_THROWS_AS(section_norm(g, charts, bad, 2.0, &trans), InputError);
  CHECK(section_norm(g, charts, ds.section, 2.0, &trans) > 0.0);
}

TEST_CASE("exponent comparison maps are the identity with full certificates") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Atlas atlas = build_atlas(g, coords_pool(g));
  REQUIRE(atlas.charts.size() == 1);

  Rng rng(77);
  std::vector<VertexFunction> probes;
  for (int t = 0; t < 5; ++t) {
    std::vector<Rational> vals(g.vertex_count());
    for (Rational& r : vals) r = rng.rational();
    probes.push_back(VertexFunction::of(g, [&vals](int v) { return vals[static_cast<std::size_t>(v)]; }));
  }

  const BundleComparison cmp = pq_map(g, atlas.charts, 1.5, 2.0, probes);
  CHECK(cmp.all_identity);
  CHECK(cmp.lipschitz_ok);
  CHECK(cmp.surjective_ok);
  CHECK(cmp.intertwines_ok);
  CHECK_FALSE(cmp.notes.empty());
  for (const auto& [v, at] : cmp.by_chart[0]) {
    CHECK(at.identity);
    CHECK(matrix_is(at.matrix, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}}));
  }

  CHECK_THROWS_AS(pq_map(g, atlas.charts, 2.0, 2.0), InputError);
  CHECK_THROWS_AS(pq_map(g, atlas.charts, 3.0, 2.0), InputError);
}

TEST_CASE("exponent comparison maps compose") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Atlas atlas = build_atlas(g, coords_pool(g));

  const BundleComparison m13 = pq_map(g, atlas.charts, 1.5, 3.0);
  const BundleComparison m12 = pq_map(g, atlas.charts, 1.5, 2.0);
  const BundleComparison m23 = pq_map(g, atlas.charts, 2.0, 3.0);
  CHECK(pq_composes(m13, m12, m23));
}

TEST_CASE("pointwise Lipschitz constants agree with the gradient norm on the grid") {
  const MetricGraph g = make_grid(3, 3, 1.0);
  const Atlas atlas = build_atlas(g, coords_pool(g));
  const VertexFunction f =
      Rational(2) * coordinate_function(g, 0) + Rational(3) * coordinate_function(g, 1);

  const CheegerReport rep = cheeger_compare(g, atlas.charts, f);
  CHECK(rep.equal_stars == g.vertex_count());
  CHECK(rep.gap_stars == 0);
  CHECK(rep.all_submetry_ok);
  for (const auto& [v, at] : rep.at) {
    CHECK(at.lip == Rational(3));
    CHECK(at.df_norm == Rational(3));
    CHECK(at.equal);
    CHECK_FALSE(at.kernel_covector.has_value());
    CHECK(at.submetry_checked);
    CHECK(at.submetry_ok);
    CHECK(at.submetry_worst == 1.0);
  }
}

TEST_CASE("null directions open a gap between Lipschitz and gradient norms") {
  const MetricGraph rug = make_rug(3, 3, 1.0);
  const std::vector<Chart> charts = {make_chart(rug, coords_map(rug), all_stars(rug))};
  const VertexFunction y = coordinate_function(rug, 1);

  const CheegerReport rep = cheeger_compare(rug, charts, y);
  CHECK(rep.equal_stars == 0);
  CHECK(rep.gap_stars == rug.vertex_count());
  CHECK(rep.all_submetry_ok);
  for (const auto& [v, at] : rep.at) {
    CHECK(at.lip == Rational(1));
    CHECK(at.df_norm == Rational(0));
    CHECK_FALSE(at.equal);
    // The y covector is invisible to the gradient seminorm but moves along
    // the null verticals.
    REQUIRE(at.kernel_covector.has_value());
    CHECK((*at.kernel_covector)[0] == Rational(0));
    CHECK((*at.kernel_covector)[1] == Rational(1));
  }
}

TEST_CASE("the kernel direction persists even when the values agree") {
  const MetricGraph rug = make_rug(3, 3, 1.0);
  const std::vector<Chart> charts = {make_chart(rug, coords_map(rug), all_stars(rug))};
  const VertexFunction f = coordinate_function(rug, 0) + coordinate_function(rug, 1);

  const CheegerReport rep = cheeger_compare(rug, charts, f);
  CHECK(rep.equal_stars == rug.vertex_count());
  CHECK(rep.gap_stars == 0);
  for (const auto& [v, at] : rep.at) {
    CHECK(at.lip == Rational(1));
    CHECK(at.df_norm == Rational(1));
    CHECK(at.equal);
    REQUIRE(at.kernel_covector.has_value());
  }
}

TEST_CASE("one dimensional rug charts compare cleanly against Lipschitz constants") {
  const MetricGraph rug = make_rug(3, 3, 1.0);
  const Atlas atlas = build_atlas(rug, coords_pool(rug));
  REQUIRE(atlas.charts.size() == 1);
  REQUIRE(atlas.charts[0].dim() == 1);

  const CheegerReport rx = cheeger_compare(rug, atlas.charts, coordinate_function(rug, 0));
  CHECK(rx.equal_stars == rug.vertex_count());
  CHECK(rx.all_submetry_ok);

  const CheegerReport ry = cheeger_compare(rug, atlas.charts, coordinate_function(rug, 1));
  CHECK(ry.gap_stars == rug.vertex_count());
  for (const auto& [v, at] : ry.at) {
    CHECK(at.lip == Rational(1));
    CHECK(at.df_norm == Rational(0));
  }
}
