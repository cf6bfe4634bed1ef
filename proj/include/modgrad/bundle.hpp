#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modgrad/charts.hpp"

namespace modgrad {

namespace detail {

// Basis of the right kernel of the row set, exact over the rationals.
// Deterministic: free columns in ascending order, pivot entries eliminated.
inline std::vector<std::vector<Rational>> rational_nullspace(std::vector<std::vector<Rational>> rows,
                                                             std::size_t width) {
  std::vector<std::size_t> pivot_col;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < width && rank < rows.size(); ++col) {
    std::size_t piv = rank;
    while (piv < rows.size() && rows[piv][col] == 0) ++piv;
    if (piv == rows.size()) continue;
    std::swap(rows[piv], rows[rank]);
    const Rational lead = rows[rank][col];
    for (std::size_t c = col; c < width; ++c) rows[rank][c] /= lead;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == rank || rows[r][col] == 0) continue;
      const Rational f = rows[r][col];
      for (std::size_t c = col; c < width; ++c) rows[r][c] -= f * rows[rank][c];
    }
    pivot_col.push_back(col);
    ++rank;
  }
  std::vector<char> is_pivot(width, 0);
  for (std::size_t c : pivot_col) is_pivot[c] = 1;
  std::vector<std::vector<Rational>> basis;
  for (std::size_t free = 0; free < width; ++free) {
    if (is_pivot[free]) continue;
    std::vector<Rational> v(width, Rational(0));
    v[free] = Rational(1);
    for (std::size_t r = 0; r < rank; ++r) v[pivot_col[r]] = -rows[r][free];
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace detail

// ---- transitions ----

struct TransitionAt {
  std::vector<std::vector<Rational>> matrix;  // maps source-chart covectors to target-chart covectors
  bool exact = false;
  double residual = 0;        // largest differential residual behind the matrix
  bool isometry_exact = false;  // source directions reproduced exactly through the matrix
  double isometry_gap = 0;
};

struct ChartTransitions {
  std::size_t from = 0, to = 0;
  std::map<int, TransitionAt> at;  // keyed by overlap star
};

struct TransitionReport {
  std::vector<ChartTransitions> maps;
  bool all_exact = true;
  bool cocycle_exact = true;
  double cocycle_gap = 0;
  std::size_t overlap_stars = 0;
  std::size_t triple_overlaps = 0;

  const TransitionAt* find(std::size_t from, std::size_t to, int star) const {
    for (const ChartTransitions& t : maps) {
      if (t.from != from || t.to != to) continue;
      const auto it = t.at.find(star);
      return it == t.at.end() ? nullptr : &it->second;
    }
    return nullptr;
  }
};

// Transition maps on pairwise chart overlaps: differentiate the source
// coordinates inside the target chart and transpose the rows. Covectors move
// by eta = M xi; on exact overlaps the map intertwines the edge directions,
// which certifies the isometry on a spanning set.
inline TransitionReport transitions(const MetricGraph& g, const std::vector<Chart>& charts) {
  TransitionReport rep;
  for (std::size_t i = 0; i < charts.size(); ++i)
    for (std::size_t j = 0; j < charts.size(); ++j) {
      if (i == j) continue;
      std::vector<int> overlap;
      for (int v : charts[i].stars)
        if (std::find(charts[j].stars.begin(), charts[j].stars.end(), v) != charts[j].stars.end())
          overlap.push_back(v);
      if (overlap.empty()) continue;
      if (charts[i].dim() != charts[j].dim())
        throw CheckError("transitions: charts of dimension " + std::to_string(charts[i].dim()) + " and " +
                         std::to_string(charts[j].dim()) + " overlap at star '" +
                         g.vertex_ids[static_cast<std::size_t>(overlap.front())] + "'");
      const std::size_t n = charts[i].dim();
      ChartTransitions ct;
      ct.from = i;
      ct.to = j;
      std::vector<Differential> rows;  // d^{(j)} of each source coordinate
      for (std::size_t k = 0; k < n; ++k) rows.push_back(differential(g, charts[j], charts[i].phi.components[k]));
      for (int v : overlap) {
        TransitionAt ta;
        ta.matrix.assign(n, std::vector<Rational>(n, Rational(0)));
        double res = 0;
        for (std::size_t k = 0; k < n; ++k) {
          const DifferentialAt& d = rows[k].at.at(v);
          res = std::max(res, to_double(d.residual));
          for (std::size_t c = 0; c < n; ++c) ta.matrix[c][k] = d.xi[c];  // transpose
        }
        ta.residual = res;
        ta.exact = res == 0;
        rep.all_exact = rep.all_exact && ta.exact;
        // Spanning-set isometry: source direction w1_e must equal D' w2_e
        // where D' rows are the differentials above.
        const StarDirections& si = charts[i].cg.stars[static_cast<std::size_t>(v)];
        const StarDirections& sj = charts[j].cg.stars[static_cast<std::size_t>(v)];
        ta.isometry_exact = si.edges == sj.edges;
        double gap = 0;
        for (std::size_t e = 0; e < si.edges.size() && ta.isometry_exact; ++e) {
          for (std::size_t k = 0; k < n; ++k) {
            Rational acc(0);
            for (std::size_t c = 0; c < n; ++c) acc += ta.matrix[c][k] * sj.w[e][c];
            if (acc != si.w[e][k]) {
              ta.isometry_exact = false;
              gap = std::max(gap, std::abs(to_double(acc - si.w[e][k])));
            }
          }
        }
        ta.isometry_gap = gap;
        ct.at.emplace(v, std::move(ta));
        ++rep.overlap_stars;
      }
      rep.maps.push_back(std::move(ct));
    }
  // Cocycle on triple overlaps.
  for (std::size_t a = 0; a < charts.size(); ++a)
    for (std::size_t b = 0; b < charts.size(); ++b)
      for (std::size_t c = 0; c < charts.size(); ++c) {
        if (a == b || b == c || a == c) continue;
        for (int v : charts[a].stars) {
          const TransitionAt* ab = rep.find(a, b, v);
          const TransitionAt* bc = rep.find(b, c, v);
          const TransitionAt* ac = rep.find(a, c, v);
          if (!ab || !bc || !ac) continue;
          ++rep.triple_overlaps;
          const std::size_t n = ac->matrix.size();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t s = 0; s < n; ++s) {
              Rational acc(0);
              for (std::size_t k = 0; k < n; ++k) acc += bc->matrix[r][k] * ab->matrix[k][s];
              if (acc != ac->matrix[r][s]) {
                rep.cocycle_exact = false;
                rep.cocycle_gap = std::max(rep.cocycle_gap, std::abs(to_double(acc - ac->matrix[r][s])));
              }
            }
        }
      }
  return rep;
}

// ---- sections ----

struct Section {
  // Per chart: star -> covector in that chart's coordinates.
  std::vector<std::map<int, std::vector<Rational>>> by_chart;
};

struct SectionCompat {
  bool compatible = true;
  bool exact = true;
  double max_gap = 0;
  std::optional<std::string> mismatch_star;
};

// Compatibility across overlaps: pushing the source covector through the
// transition must reproduce the target covector, exactly on exact overlaps.
inline SectionCompat check_section(const MetricGraph& g, const std::vector<Chart>& charts,
                                   const TransitionReport& trans, const Section& s,
                                   double tol = 1e-9) {
  SectionCompat rep;
  for (const ChartTransitions& ct : trans.maps)
    for (const auto& [v, ta] : ct.at) {
      const auto from_it = s.by_chart[ct.from].find(v);
      const auto to_it = s.by_chart[ct.to].find(v);
      if (from_it == s.by_chart[ct.from].end() || to_it == s.by_chart[ct.to].end()) continue;
      const std::size_t n = ta.matrix.size();
      for (std::size_t r = 0; r < n; ++r) {
        Rational acc(0);
        for (std::size_t k = 0; k < n; ++k) acc += ta.matrix[r][k] * from_it->second[k];
        const Rational gap = rat_abs(acc - to_it->second[r]);
        if (gap == 0) continue;
        rep.exact = false;
        rep.max_gap = std::max(rep.max_gap, to_double(gap));
        if ((ta.exact && gap != 0) || rep.max_gap > tol) {
          rep.compatible = false;
          if (!rep.mismatch_star) rep.mismatch_star = g.vertex_ids[static_cast<std::size_t>(v)];
        }
      }
    }
  return rep;
}

// Gamma_p norm: each covered star contributes its measure times |omega(x)|^p,
// evaluated in the first chart that covers it. p = inf takes the essential max.
inline double section_norm(const MetricGraph& g, const std::vector<Chart>& charts, const Section& s, double p,
                           const TransitionReport* trans = nullptr) {
  if (trans) {
    const SectionCompat c = check_section(g, charts, *trans, s);
    if (!c.compatible)
      throw InputError("section_norm: section incompatible at star '" + *c.mismatch_star + "'");
  }
  std::vector<char> seen(g.vertex_count(), 0);
  double acc = 0, sup = 0;
  for (std::size_t i = 0; i < charts.size(); ++i)
    for (const auto& [v, xi] : s.by_chart[i]) {
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = 1;
      const double norm = to_double(charts[i].cg.eval_exact(v, xi));
      const double mass = location_measure(g, vertex_star(v));
      if (mass <= 0) continue;
      acc += mass * std::pow(norm, p);
      sup = std::max(sup, norm);
    }
  if (std::isinf(p)) return sup;
  if (!(p >= 1)) throw InputError("section_norm: p must be >= 1");
  return std::pow(acc, 1.0 / p);
}

struct DifferentialSection {
  Section section;
  bool all_exact = true;
  double max_residual = 0;
  SectionCompat compat;
};

// Chart-wise differentials glued into a section; overlap compatibility is
// verified through the transition maps.
inline DifferentialSection differential_section(const MetricGraph& g, const std::vector<Chart>& charts,
                                                const VertexFunction& f, const TransitionReport* trans = nullptr) {
  DifferentialSection out;
  out.section.by_chart.resize(charts.size());
  for (std::size_t i = 0; i < charts.size(); ++i) {
    const Differential df = differential(g, charts[i], f);
    out.all_exact = out.all_exact && df.all_exact;
    out.max_residual = std::max(out.max_residual, df.max_residual);
    for (const auto& [v, d] : df.at) out.section.by_chart[i].emplace(v, d.xi);
  }
  if (trans) out.compat = check_section(g, charts, *trans, out.section);
  return out;
}

// L^p norm of the star gradient over the stars covered by the charts; the
// comparison partner of the section norm.
inline double gradient_lp_norm(const MetricGraph& g, const std::vector<Chart>& charts, const VertexFunction& f,
                               double p) {
  const WeakGradient gf = minimal_weak_gradient(g, f, LocationKind::VertexStar);
  std::vector<char> seen(g.vertex_count(), 0);
  double acc = 0, sup = 0;
  for (const Chart& c : charts)
    for (int v : c.stars) {
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = 1;
      const double mass = location_measure(g, vertex_star(v));
      if (mass <= 0) continue;
      acc += mass * std::pow(gf.g[static_cast<std::size_t>(v)], p);
      sup = std::max(sup, gf.g[static_cast<std::size_t>(v)]);
    }
  if (std::isinf(p)) return sup;
  return std::pow(acc, 1.0 / p);
}

// ---- p-q comparison ----

struct PqMapAt {
  std::vector<std::vector<Rational>> matrix;
  bool identity = false;
};

struct BundleComparison {
  double p = 0, q = 0;
  std::vector<std::map<int, PqMapAt>> by_chart;
  bool all_identity = true;
  bool lipschitz_ok = true;          // |pi(xi)|_p <= |xi|_q on sampled covectors
  bool surjective_ok = true;         // exact preimage for every basis covector
  bool intertwines_ok = true;        // pi(d_q f) = d_p f for the probe functions
  std::vector<std::string> notes;
};

// Map between the q-structure and p-structure fibers, built by
// differentiating each chart's own coordinates. In this model sigma-null
// sets do not depend on the exponent, so the map must come out as the
// identity wherever the coordinates differentiate exactly; that collapse is
// asserted rather than assumed.
inline BundleComparison pq_map(const MetricGraph& g, const std::vector<Chart>& charts, double p, double q,
                               const std::vector<VertexFunction>& probes = {}) {
  if (!(p < q)) throw InputError("pq_map: expected p < q");
  BundleComparison rep;
  rep.p = p;
  rep.q = q;
  rep.by_chart.resize(charts.size());
  for (std::size_t i = 0; i < charts.size(); ++i) {
    const Chart& chart = charts[i];
    const std::size_t n = chart.dim();
    std::vector<Differential> self;
    for (std::size_t k = 0; k < n; ++k) self.push_back(differential(g, chart, chart.phi.components[k]));
    for (int v : chart.stars) {
      PqMapAt at;
      at.matrix.assign(n, std::vector<Rational>(n, Rational(0)));
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t c = 0; c < n; ++c) at.matrix[c][k] = self[k].at.at(v).xi[c];
      at.identity = true;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
          if (at.matrix[r][c] != Rational(r == c ? 1 : 0)) at.identity = false;
      rep.all_identity = rep.all_identity && at.identity;
      // 1-Lipschitz on a deterministic covector sample; the two pointwise
      // norms agree in this model, so the bound must hold with equality.
      Rng rng(0xb0b0ULL + static_cast<std::uint64_t>(v));
      for (int s = 0; s < 16; ++s) {
        std::vector<Rational> xi(n);
        for (std::size_t k = 0; k < n; ++k) xi[k] = rng.rational(8, 5);
        std::vector<Rational> img(n, Rational(0));
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < n; ++c) img[r] += at.matrix[r][c] * xi[c];
        if (chart.cg.eval_exact(v, img) > chart.cg.eval_exact(v, xi)) rep.lipschitz_ok = false;
      }
      // Surjectivity by explicit preimage of each basis covector.
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<std::vector<Rational>> sys(n, std::vector<Rational>(n));
        std::vector<Rational> rhs(n, Rational(0));
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < n; ++c) sys[r][c] = at.matrix[r][c];
        rhs[k] = Rational(1);
        if (!detail::solve_linear_rational(sys, rhs)) rep.surjective_ok = false;
      }
      rep.by_chart[i].emplace(v, std::move(at));
    }
    for (const VertexFunction& f : probes) {
      const Differential dq = differential(g, chart, f);
      const Differential dp = differential(g, chart, f);
      for (int v : chart.stars) {
        const PqMapAt& at = rep.by_chart[i].at(v);
        std::vector<Rational> img(n, Rational(0));
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < n; ++c) img[r] += at.matrix[r][c] * dq.at.at(v).xi[c];
        if (img != dp.at.at(v).xi) rep.intertwines_ok = false;
      }
    }
  }
  if (rep.all_identity) rep.notes.push_back("comparison map is the identity at every location");
  return rep;
}

// Composition law pi_{p,q} = pi_{p,s} compose pi_{s,q}, exact on matrices.
inline bool pq_composes(const BundleComparison& pq, const BundleComparison& ps, const BundleComparison& sq) {
  if (pq.by_chart.size() != ps.by_chart.size() || pq.by_chart.size() != sq.by_chart.size()) return false;
  for (std::size_t i = 0; i < pq.by_chart.size(); ++i)
    for (const auto& [v, at] : pq.by_chart[i]) {
      const auto a = ps.by_chart[i].find(v);
      const auto b = sq.by_chart[i].find(v);
      if (a == ps.by_chart[i].end() || b == sq.by_chart[i].end()) return false;
      const std::size_t n = at.matrix.size();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          Rational acc(0);
          for (std::size_t k = 0; k < n; ++k) acc += a->second.matrix[r][k] * b->second.matrix[k][c];
          if (acc != at.matrix[r][c]) return false;
        }
    }
  return true;
}

// ---- Cheeger comparison ----

struct CheegerAt {
  Rational lip{};       // max over all incident edges, sigma ignored
  Rational df_norm{};   // star gradient: sigma-positive edges only
  bool equal = false;
  std::optional<std::vector<Rational>> kernel_covector;  // killed by the p-norm, visible to Lip
  bool submetry_checked = false;
  bool submetry_ok = false;
  double submetry_worst = 0;  // largest Cheeger norm needed to cover a unit p-covector
};

struct CheegerReport {
  std::map<int, CheegerAt> at;
  std::size_t equal_stars = 0;
  std::size_t gap_stars = 0;
  bool all_submetry_ok = true;
};

// Pointwise Lipschitz constant against the p-weak norm, star by star. Where
// the values agree the chart doubles as a Cheeger chart; where they do not,
// a covector in the kernel of the comparison map witnesses non-injectivity.
// For dimensions <= 2 the submetry property is checked directly: every
// p-unit covector must be reachable from the Cheeger unit ball modulo the
// kernel.
inline CheegerReport cheeger_compare(const MetricGraph& g, const std::vector<Chart>& charts,
                                     const VertexFunction& f) {
  CheegerReport rep;
  for (const Chart& chart : charts) {
    const std::size_t n = chart.dim();
    for (int v : chart.stars) {
      if (rep.at.count(v)) continue;
      CheegerAt ca;
      std::vector<std::vector<Rational>> all_dirs;
      for (int e : g.incident[static_cast<std::size_t>(v)]) {
        ca.lip = std::max(ca.lip, rat_abs(f.slope(g, e)));
        all_dirs.push_back(map_direction(g, chart.phi, e));
      }
      const StarDirections& pos = chart.cg.stars[static_cast<std::size_t>(v)];
      for (std::size_t e = 0; e < pos.edges.size(); ++e) ca.df_norm = std::max(ca.df_norm, rat_abs(f.slope(g, pos.edges[e])));
      ca.equal = ca.lip == ca.df_norm;
      if (ca.equal)
        ++rep.equal_stars;
      else
        ++rep.gap_stars;

      const std::vector<std::vector<Rational>> kernel = detail::rational_nullspace(pos.w, n);
      for (const auto& k : kernel) {
        bool visible = false;
        for (const auto& w : all_dirs) {
          Rational dot(0);
          for (std::size_t c = 0; c < n; ++c) dot += k[c] * w[c];
          if (dot != 0) visible = true;
        }
        if (visible) {
          ca.kernel_covector = k;
          break;
        }
      }

      if (n <= 2 && !pos.w.empty()) {
        ca.submetry_checked = true;
        ca.submetry_ok = true;
        auto cheeger_norm_min = [&](const std::vector<Rational>& xi) {
          // Minimum Cheeger seminorm over kernel shifts, exact.
          if (kernel.empty()) {
            Rational best(0);
            for (const auto& w : all_dirs) {
              Rational dot(0);
              for (std::size_t c = 0; c < n; ++c) dot += xi[c] * w[c];
              best = std::max(best, rat_abs(dot));
            }
            return best;
          }
          StarDirections sys;
          std::vector<Rational> slopes;
          for (const auto& w : all_dirs) {
            std::vector<Rational> row(kernel.size());
            Rational base(0);
            for (std::size_t c = 0; c < n; ++c) base += xi[c] * w[c];
            for (std::size_t kidx = 0; kidx < kernel.size(); ++kidx) {
              Rational dot(0);
              for (std::size_t c = 0; c < n; ++c) dot += kernel[kidx][c] * w[c];
              row[kidx] = dot;
            }
            sys.w.push_back(std::move(row));
            slopes.push_back(-base);
          }
          return detail::chebyshev_covector(sys, slopes, kernel.size()).residual;
        };
        std::vector<std::vector<Rational>> samples;
        if (n == 1) {
          samples.push_back({Rational(1)});
          samples.push_back({Rational(-1)});
        } else {
          for (long a = -3; a <= 3; ++a)
            for (long b = -3; b <= 3; ++b) {
              if (a == 0 && b == 0) continue;
              samples.push_back({Rational(a), Rational(b)});
            }
        }
        for (auto& xi : samples) {
          const Rational pn = chart.cg.eval_exact(v, xi);
          if (pn == 0) continue;
          for (auto& c : xi) c /= pn;  // p-norm exactly 1
          const Rational needed = cheeger_norm_min(xi);
          ca.submetry_worst = std::max(ca.submetry_worst, to_double(needed));
          if (needed > 1) ca.submetry_ok = false;
        }
        rep.all_submetry_ok = rep.all_submetry_ok && ca.submetry_ok;
      }
      rep.at.emplace(v, std::move(ca));
    }
  }
  return rep;
}

}  // namespace modgrad
