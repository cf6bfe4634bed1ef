#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modgrad/function.hpp"
#include "modgrad/gradient.hpp"
#include "modgrad/lp.hpp"
#include "modgrad/modulus.hpp"
#include "modgrad/plans.hpp"
#include "modgrad/rng.hpp"

namespace modgrad {

// Vector-valued vertex map with named components.
struct VectorMap {
  std::vector<std::string> names;
  std::vector<VertexFunction> components;

  std::size_t dim() const { return components.size(); }
};

inline VectorMap make_vector_map(std::vector<std::pair<std::string, VertexFunction>> comps) {
  VectorMap m;
  for (auto& [name, f] : comps) {
    m.names.push_back(name);
    m.components.push_back(std::move(f));
  }
  return m;
}

// Direction vector of an edge under the map: per-component slope.
inline std::vector<Rational> map_direction(const MetricGraph& g, const VectorMap& phi, int e) {
  std::vector<Rational> w(phi.dim());
  for (std::size_t k = 0; k < phi.dim(); ++k) w[k] = phi.components[k].slope(g, e);
  return w;
}

// Scalar contraction of the map: (xi . phi) as a vertex function.
inline VertexFunction contract(const MetricGraph& g, const VectorMap& phi, const std::vector<Rational>& xi) {
  VertexFunction f = VertexFunction::zero(g);
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    Rational acc(0);
    for (std::size_t k = 0; k < phi.dim(); ++k) acc += xi[k] * phi.components[k].at(static_cast<int>(v));
    f.values[v] = acc;
    f.values_d[v] = to_double(acc);
  }
  return f;
}

// Direction set W_x at each star and the induced seminorm
// Phi^x(xi) = max over W_x of |xi . w|.
struct StarDirections {
  std::vector<int> edges;
  std::vector<std::vector<Rational>> w;
  std::vector<std::vector<double>> w_d;
};

struct CanonicalGradient {
  std::size_t dim = 0;
  std::vector<StarDirections> stars;

  double eval(int v, const std::vector<double>& xi) const {
    double best = 0;
    for (const auto& w : stars[static_cast<std::size_t>(v)].w_d) {
      double dot = 0;
      for (std::size_t k = 0; k < dim; ++k) dot += xi[k] * w[k];
      best = std::max(best, std::abs(dot));
    }
    return best;
  }

  Rational eval_exact(int v, const std::vector<Rational>& xi) const {
    Rational best(0);
    for (const auto& w : stars[static_cast<std::size_t>(v)].w) {
      Rational dot(0);
      for (std::size_t k = 0; k < dim; ++k) dot += xi[k] * w[k];
      best = std::max(best, rat_abs(dot));
    }
    return best;
  }
};

// Assembles W_x from sigma-positive incident edges; a plan restricts the
// support to edges its barycenter charges.
inline CanonicalGradient canonical_gradient(const MetricGraph& g, const VectorMap& phi,
                                            const Plan* support_plan = nullptr) {
  CanonicalGradient cg;
  cg.dim = phi.dim();
  cg.stars.resize(g.vertex_count());
  std::optional<Barycenter> bary;
  if (support_plan) bary = barycenter(g, *support_plan);
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    for (int e : g.incident[v]) {
      if (g.edges[static_cast<std::size_t>(e)].measure <= 0) continue;
      if (bary && !(bary->mass[static_cast<std::size_t>(e)] > 0)) continue;
      StarDirections& sd = cg.stars[v];
      sd.edges.push_back(e);
      sd.w.push_back(map_direction(g, phi, e));
      sd.w_d.emplace_back();
      for (const Rational& r : sd.w.back()) sd.w_d.back().push_back(to_double(r));
    }
  }
  return cg;
}

namespace detail {

inline std::size_t rational_rank(std::vector<std::vector<Rational>> rows, std::size_t width) {
  std::size_t rank = 0;
  for (std::size_t col = 0; col < width && rank < rows.size(); ++col) {
    std::size_t piv = rank;
    while (piv < rows.size() && rows[piv][col] == 0) ++piv;
    if (piv == rows.size()) continue;
    std::swap(rows[piv], rows[rank]);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == rank || rows[r][col] == 0) continue;
      const Rational f = rows[r][col] / rows[rank][col];
      for (std::size_t c = col; c < width; ++c) rows[r][c] -= f * rows[rank][c];
    }
    ++rank;
  }
  return rank;
}

// Golden-section refinement of a bracketed minimum.
template <class F>
double golden_min(F f, double a, double b, int iters = 80) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

}  // namespace detail

struct IndependenceIndex {
  std::vector<double> value;       // per star; 0 exactly when the rank test fails
  std::vector<std::size_t> rank;   // rank of W_x over the rationals
  std::vector<char> exact_zero;    // the zero came from the rank test, not from rounding
  std::vector<std::optional<std::vector<double>>> minimizer;
};

// I(phi)(x) = min over unit xi of Phi^x(xi). Zero is decided exactly: it
// happens precisely when W_x fails to span. Positive values are located
// numerically (angular sweep at N = 2, seeded sphere search above).
inline IndependenceIndex independence_index(const MetricGraph& g, const CanonicalGradient& cg) {
  const std::size_t n = cg.dim;
  if (n < 1) throw InputError("independence_index: needs at least one component");
  IndependenceIndex out;
  out.value.assign(g.vertex_count(), 0);
  out.rank.assign(g.vertex_count(), 0);
  out.exact_zero.assign(g.vertex_count(), 0);
  out.minimizer.resize(g.vertex_count());
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const StarDirections& sd = cg.stars[v];
    out.rank[v] = detail::rational_rank(sd.w, n);
    if (out.rank[v] < n) {
      out.exact_zero[v] = 1;
      continue;
    }
    if (n == 1) {
      double best = 0;
      for (const auto& w : sd.w_d) best = std::max(best, std::abs(w[0]));
      out.value[v] = best;
      out.minimizer[v] = std::vector<double>{1.0};
      continue;
    }
    auto eval = [&](const std::vector<double>& xi) { return cg.eval(static_cast<int>(v), xi); };
    if (n == 2) {
      auto at_angle = [&](double t) { return eval({std::cos(t), std::sin(t)}); };
      const int M = 2048;
      double best_t = 0, best_f = std::numeric_limits<double>::infinity();
      for (int i = 0; i < M; ++i) {
        const double t = M_PI * i / M;
        const double f = at_angle(t);
        if (f < best_f) {
          best_f = f;
          best_t = t;
        }
      }
      const double w = M_PI / M;
      const double t = detail::golden_min(at_angle, best_t - w, best_t + w);
      out.value[v] = at_angle(t);
      out.minimizer[v] = std::vector<double>{std::cos(t), std::sin(t)};
      continue;
    }
    Rng rng(0x5eedULL + v);
    std::vector<double> best(n, 0);
    best[0] = 1;
    double best_f = eval(best);
    for (int s = 0; s < 4000; ++s) {
      std::vector<double> xi(n);
      double norm = 0;
      for (std::size_t k = 0; k < n; ++k) {
        xi[k] = rng.uniform(-1.0, 1.0);
        norm += xi[k] * xi[k];
      }
      if (norm <= 1e-12) continue;
      norm = std::sqrt(norm);
      for (double& c : xi) c /= norm;
      const double f = eval(xi);
      if (f < best_f) {
        best_f = f;
        best = xi;
      }
    }
    double step = 0.25;
    while (step > 1e-9) {
      bool improved = false;
      for (std::size_t k = 0; k < n; ++k)
        for (double dir : {+1.0, -1.0}) {
          std::vector<double> xi = best;
          xi[k] += dir * step;
          double norm = 0;
          for (double c : xi) norm += c * c;
          norm = std::sqrt(norm);
          for (double& c : xi) c /= norm;
          const double f = eval(xi);
          if (f < best_f) {
            best_f = f;
            best = xi;
            improved = true;
          }
        }
      if (!improved) step /= 2;
    }
    out.value[v] = best_f;
    out.minimizer[v] = best;
  }
  return out;
}

// (U, 0) is a zero-dimensional chart exactly when every edge meeting U is
// sigma-null; cross-checked against the modulus of the family of curves
// spending length in U.
inline bool zero_chart_check(const MetricGraph& g, const std::vector<Location>& locations,
                             std::size_t enum_budget = 200000) {
  std::vector<char> touches(g.edge_count(), 0);
  for (const Location& x : locations) {
    if (x.kind == LocationKind::EdgePoint)
      touches[static_cast<std::size_t>(x.index)] = 1;
    else
      for (int e : g.incident[static_cast<std::size_t>(x.index)]) touches[static_cast<std::size_t>(e)] = 1;
  }
  bool all_null = true;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (touches[e] && g.edges[e].measure > 0) all_null = false;

  // The family of curves spending positive length in U: any curve traversing
  // a touched edge.
  bool any_touched = false;
  for (std::size_t e = 0; e < g.edge_count(); ++e) any_touched = any_touched || touches[e];
  if (any_touched) {
    std::vector<int> all;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) all.push_back(static_cast<int>(v));
    CurveFamily f = CurveFamily::connecting(all, all, static_cast<int>(g.vertex_count()));
    f.required = touches;
    const ModZeroResult z = mod_zero_check(g, f, enum_budget);
    if (z.is_zero != all_null)
      throw CheckError("zero_chart_check: direct edge test and modulus test disagree");
  }
  return all_null;
}

// ---- charts and atlases ----

struct Chart {
  std::vector<int> stars;  // vertex indices of U
  VectorMap phi;
  CanonicalGradient cg;
  std::map<int, double> independence;

  std::size_t dim() const { return phi.dim(); }
};

struct Atlas {
  std::vector<Chart> charts;          // descending dimension
  std::vector<int> zero_dim_stars;    // exceptional stars: the 0-dimensional chart
  std::vector<int> uncovered;         // non-exceptional stars the pool could not chart
  std::map<int, std::size_t> ceiling;  // per star: rank achievable with the whole pool
  std::vector<std::string> warnings;
};

// Greedy atlas: largest dimension first, carving for each candidate subset of
// pool functions the stars where its direction set has full rank. Rank
// decides coverage exactly; the independence values are attached for
// reporting.
inline Atlas build_atlas(const MetricGraph& g, const std::vector<std::pair<std::string, VertexFunction>>& pool) {
  if (pool.empty()) throw InputError("build_atlas: candidate pool is empty");
  Atlas atlas;

  std::vector<char> remaining(g.vertex_count(), 0);
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    if (g.positive_degree(static_cast<int>(v)) == 0)
      atlas.zero_dim_stars.push_back(static_cast<int>(v));
    else
      remaining[v] = 1;
  }

  {
    VectorMap all;
    for (const auto& [name, f] : pool) {
      all.names.push_back(name);
      all.components.push_back(f);
    }
    const CanonicalGradient cg_all = canonical_gradient(g, all);
    for (std::size_t v = 0; v < g.vertex_count(); ++v)
      if (remaining[v])
        atlas.ceiling[static_cast<int>(v)] = detail::rational_rank(cg_all.stars[v].w, all.dim());
  }

  const std::size_t max_dim = std::min(pool.size(), static_cast<std::size_t>(8));
  for (std::size_t dim = max_dim; dim >= 1; --dim) {
    for (;;) {
      // Enumerate dim-subsets of the pool in index order.
      std::vector<std::size_t> idx(dim);
      for (std::size_t i = 0; i < dim; ++i) idx[i] = i;
      std::optional<std::vector<std::size_t>> best_subset;
      std::vector<int> best_cover;
      auto consider = [&](const std::vector<std::size_t>& subset) {
        VectorMap phi;
        for (std::size_t i : subset) {
          phi.names.push_back(pool[i].first);
          phi.components.push_back(pool[i].second);
        }
        const CanonicalGradient cg = canonical_gradient(g, phi);
        std::vector<int> cover;
        for (std::size_t v = 0; v < g.vertex_count(); ++v)
          if (remaining[v] && detail::rational_rank(cg.stars[v].w, dim) == dim) cover.push_back(static_cast<int>(v));
        if (cover.size() > best_cover.size()) {
          best_cover = std::move(cover);
          best_subset = subset;
        }
      };
      if (pool.size() >= dim) {
        for (;;) {
          consider(idx);
          std::size_t i = dim;
          while (i > 0 && idx[i - 1] == pool.size() - dim + i - 1) --i;
          if (i == 0) break;
          ++idx[i - 1];
          for (std::size_t j = i; j < dim; ++j) idx[j] = idx[j - 1] + 1;
        }
      }
      if (!best_subset || best_cover.empty()) break;
      Chart chart;
      for (std::size_t i : *best_subset) {
        chart.phi.names.push_back(pool[i].first);
        chart.phi.components.push_back(pool[i].second);
      }
      chart.cg = canonical_gradient(g, chart.phi);
      chart.stars = best_cover;
      const IndependenceIndex ii = independence_index(g, chart.cg);
      for (int v : chart.stars) {
        chart.independence[v] = ii.value[static_cast<std::size_t>(v)];
        remaining[static_cast<std::size_t>(v)] = 0;
      }
      atlas.charts.push_back(std::move(chart));
    }
    if (dim == 1) break;
  }
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    if (remaining[v]) {
      atlas.uncovered.push_back(static_cast<int>(v));
      atlas.warnings.push_back("star '" + g.vertex_ids[v] + "' reaches rank " +
                               std::to_string(atlas.ceiling[static_cast<int>(v)]) +
                               " with the pool but no chart covers it");
    }
  for (const Chart& c : atlas.charts)
    for (int v : c.stars)
      if (c.dim() < atlas.ceiling[v])
        atlas.warnings.push_back("star '" + g.vertex_ids[static_cast<std::size_t>(v)] + "' carries dimension " +
                                 std::to_string(c.dim()) + " below its pool ceiling " +
                                 std::to_string(atlas.ceiling[v]));
  return atlas;
}

// ---- differentials ----

struct DifferentialAt {
  std::vector<Rational> xi;  // covector coefficients
  std::vector<double> xi_d;
  Rational residual{};   // Chebyshev value: 0 means the linear system was consistent
  bool exact = false;
  Rational norm{};       // Phi^x(xi)
  Rational gf{};         // star gradient of f
  bool norm_matches_gradient = false;
};

struct Differential {
  std::map<int, DifferentialAt> at;  // keyed by star vertex index
  bool all_exact = true;
  double max_residual = 0;
};

namespace detail {

// Minimax fit of a covector to the slope data at one star, over the
// rationals, with the lexicographically least optimal covector: minimize the
// residual t, then each coefficient in component order. Free coefficients are
// split into positive and negative parts for the simplex.
inline DifferentialAt chebyshev_covector(const StarDirections& sd, const std::vector<Rational>& slopes,
                                         std::size_t n) {
  LinearProgram<Rational> lp;
  lp.n = 1 + 2 * n;
  lp.c.assign(lp.n, Rational(0));
  for (std::size_t i = 0; i < sd.w.size(); ++i) {
    std::vector<Rational> up(lp.n, Rational(0)), dn(lp.n, Rational(0));
    up[0] = Rational(-1);
    dn[0] = Rational(-1);
    for (std::size_t k = 0; k < n; ++k) {
      up[1 + k] = sd.w[i][k];
      up[1 + n + k] = -sd.w[i][k];
      dn[1 + k] = -sd.w[i][k];
      dn[1 + n + k] = sd.w[i][k];
    }
    lp.add_row(std::move(up), Rel::LE, slopes[i]);
    lp.add_row(std::move(dn), Rel::LE, Rational(-slopes[i]));
  }
  std::vector<std::vector<Rational>> chain;
  {
    std::vector<Rational> obj(lp.n, Rational(0));
    obj[0] = Rational(1);
    chain.push_back(std::move(obj));
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<Rational> obj(lp.n, Rational(0));
    obj[1 + k] = Rational(1);
    obj[1 + n + k] = Rational(-1);
    chain.push_back(std::move(obj));
  }
  auto res = solve_lp_lexicographic(lp, chain);
  if (!res) throw CheckError("differential: minimax stage infeasible");
  DifferentialAt out;
  out.xi.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.xi[k] = res->x[1 + k] - res->x[1 + n + k];
    out.xi_d.push_back(to_double(out.xi[k]));
  }
  out.residual = res->x[0];
  out.exact = out.residual == 0;
  return out;
}

}  // namespace detail

// Differential of f over the chart: per star the Chebyshev covector against
// the slope data, its residual, and the pointwise-norm comparison with the
// star gradient.
inline Differential differential(const MetricGraph& g, const Chart& chart, const VertexFunction& f) {
  Differential out;
  const WeakGradient gf = minimal_weak_gradient(g, f, LocationKind::VertexStar);
  for (int v : chart.stars) {
    const StarDirections& sd = chart.cg.stars[static_cast<std::size_t>(v)];
    std::vector<Rational> slopes;
    for (int e : sd.edges) slopes.push_back(f.slope(g, e));
    DifferentialAt d = detail::chebyshev_covector(sd, slopes, chart.dim());
    d.norm = chart.cg.eval_exact(v, d.xi);
    d.gf = gf.g_exact[static_cast<std::size_t>(v)];
    d.norm_matches_gradient = d.norm == d.gf;
    out.all_exact = out.all_exact && d.exact;
    out.max_residual = std::max(out.max_residual, to_double(d.residual));
    out.at.emplace(v, std::move(d));
  }
  return out;
}

// ---- calculus rules ----

struct LeibnizAt {
  Rational gap{};    // Phi^x(d(fg) - f dg - g df)
  Rational bound{};  // residual budget: r_fg + |f| r_g + |g| r_f + max quadratic correction
  bool within = false;
};

struct LeibnizReport {
  std::map<int, LeibnizAt> at;
  bool all_within = true;
  bool all_exact = true;  // every gap identically zero
};

inline LeibnizReport leibniz_check(const MetricGraph& g, const Chart& chart, const VertexFunction& f,
                                   const VertexFunction& h) {
  const VertexFunction fh = f * h;
  const Differential df = differential(g, chart, f);
  const Differential dh = differential(g, chart, h);
  const Differential dfh = differential(g, chart, fh);
  LeibnizReport rep;
  for (int v : chart.stars) {
    const DifferentialAt& a = df.at.at(v);
    const DifferentialAt& b = dh.at.at(v);
    const DifferentialAt& c = dfh.at.at(v);
    const Rational fv = f.at(v);
    const Rational hv = h.at(v);
    std::vector<Rational> diff(chart.dim());
    for (std::size_t k = 0; k < chart.dim(); ++k) diff[k] = c.xi[k] - fv * b.xi[k] - hv * a.xi[k];
    LeibnizAt la;
    la.gap = chart.cg.eval_exact(v, diff);
    Rational corr(0);
    const StarDirections& sd = chart.cg.stars[static_cast<std::size_t>(v)];
    for (int e : sd.edges) {
      // At this star, (fg) slope minus the product-rule slope is the
      // quadratic term delta_f delta_h / l, up to sign.
      const Rational q = rat_abs(f.delta(g, e) * h.delta(g, e)) / rat_of(g.edges[static_cast<std::size_t>(e)].len);
      corr = std::max(corr, q);
    }
    la.bound = c.residual + rat_abs(fv) * b.residual + rat_abs(hv) * a.residual + corr;
    la.within = la.gap <= la.bound;
    rep.all_within = rep.all_within && la.within;
    rep.all_exact = rep.all_exact && la.gap == 0;
    rep.at.emplace(v, la);
  }
  return rep;
}

// Locality: wherever f and h agree on the whole star (center and sigma-positive
// neighbors), their differentials coincide.
struct LocalityReport {
  std::vector<int> agreement_stars;
  bool differentials_match = true;
};

inline LocalityReport locality_check(const MetricGraph& g, const Chart& chart, const VertexFunction& f,
                                     const VertexFunction& h) {
  const Differential df = differential(g, chart, f);
  const Differential dh = differential(g, chart, h);
  LocalityReport rep;
  for (int v : chart.stars) {
    bool agrees = f.at(v) == h.at(v);
    for (int e : chart.cg.stars[static_cast<std::size_t>(v)].edges) {
      const int w = g.other_end(e, v);
      agrees = agrees && f.at(w) == h.at(w);
    }
    if (!agrees) continue;
    rep.agreement_stars.push_back(v);
    if (df.at.at(v).xi != dh.at.at(v).xi) rep.differentials_match = false;
  }
  return rep;
}

// Vertex map between graphs; sigma-positive edges must map to edges or
// collapse to a point.
struct GraphMap {
  std::vector<int> to_vertex;  // indexed by source vertex
};

struct ChainRuleReport {
  bool measure_compatible = true;
  double compat_constant = 0;  // smallest C with F_* mu <= C nu on edge masses
  std::optional<std::string> violating_edge;
  std::map<int, Rational> residual;  // Phi-seminorm of d(h compose F) - dh compose DF
  Rational max_residual{};
  bool exact = true;
  std::vector<int> skipped;  // source stars whose image lies outside the target chart
};

inline ChainRuleReport chain_rule_check(const MetricGraph& gs, const Chart& chart_s, const GraphMap& F,
                                        const MetricGraph& gt, const Chart& chart_t, const VertexFunction& h) {
  ChainRuleReport rep;
  if (F.to_vertex.size() != gs.vertex_count()) throw InputError("chain_rule_check: map size mismatch");

  std::vector<double> image_mass(gt.edge_count(), 0);
  std::map<std::pair<int, int>, int> target_edge;
  for (std::size_t e = 0; e < gt.edge_count(); ++e) {
    target_edge[{gt.edges[e].u, gt.edges[e].v}] = static_cast<int>(e);
    target_edge[{gt.edges[e].v, gt.edges[e].u}] = static_cast<int>(e);
  }
  for (std::size_t e = 0; e < gs.edge_count(); ++e) {
    if (gs.edges[e].measure <= 0) continue;
    const int fu = F.to_vertex[static_cast<std::size_t>(gs.edges[e].u)];
    const int fv = F.to_vertex[static_cast<std::size_t>(gs.edges[e].v)];
    if (fu == fv) continue;
    auto it = target_edge.find({fu, fv});
    if (it == target_edge.end())
      throw InputError("chain_rule_check: edge '" + gs.edges[e].id + "' has no image edge");
    image_mass[static_cast<std::size_t>(it->second)] += gs.edges[e].measure;
  }
  for (std::size_t e = 0; e < gt.edge_count(); ++e) {
    if (image_mass[e] <= 0) continue;
    if (gt.edges[e].measure <= 0) {
      rep.measure_compatible = false;
      rep.violating_edge = gt.edges[e].id;
      throw InputError("chain_rule_check: image charges the sigma-null edge '" + gt.edges[e].id + "'");
    }
    rep.compat_constant = std::max(rep.compat_constant, image_mass[e] / gt.edges[e].measure);
  }

  // Pull the target coordinates and h back through F.
  std::vector<VertexFunction> pulled;
  for (std::size_t k = 0; k < chart_t.dim(); ++k) {
    VertexFunction G = VertexFunction::zero(gs);
    for (std::size_t v = 0; v < gs.vertex_count(); ++v) {
      G.values[v] = chart_t.phi.components[k].at(F.to_vertex[v]);
      G.values_d[v] = to_double(G.values[v]);
    }
    pulled.push_back(std::move(G));
  }
  VertexFunction hF = VertexFunction::zero(gs);
  for (std::size_t v = 0; v < gs.vertex_count(); ++v) {
    hF.values[v] = h.at(F.to_vertex[v]);
    hF.values_d[v] = to_double(hF.values[v]);
  }

  const Differential dhF = differential(gs, chart_s, hF);
  const Differential dh = differential(gt, chart_t, h);
  std::vector<Differential> dG;
  for (const VertexFunction& G : pulled) dG.push_back(differential(gs, chart_s, G));

  std::vector<char> in_target_chart(gt.vertex_count(), 0);
  for (int v : chart_t.stars) in_target_chart[static_cast<std::size_t>(v)] = 1;

  for (int v : chart_s.stars) {
    const int fv = F.to_vertex[static_cast<std::size_t>(v)];
    if (!in_target_chart[static_cast<std::size_t>(fv)]) {
      rep.skipped.push_back(v);
      continue;
    }
    const DifferentialAt& dh_at = dh.at.at(fv);
    std::vector<Rational> composed(chart_s.dim(), Rational(0));
    for (std::size_t k = 0; k < chart_t.dim(); ++k) {
      const DifferentialAt& row = dG[k].at.at(v);
      for (std::size_t j = 0; j < chart_s.dim(); ++j) composed[j] += dh_at.xi[k] * row.xi[j];
    }
    std::vector<Rational> diff(chart_s.dim());
    for (std::size_t j = 0; j < chart_s.dim(); ++j) diff[j] = dhF.at.at(v).xi[j] - composed[j];
    const Rational r = chart_s.cg.eval_exact(v, diff);
    rep.residual[v] = r;
    rep.max_residual = std::max(rep.max_residual, r);
    rep.exact = rep.exact && r == 0;
  }
  return rep;
}

}  // namespace modgrad
