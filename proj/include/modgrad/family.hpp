#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "modgrad/curve.hpp"
#include "modgrad/graph.hpp"

namespace modgrad {

// Connecting family: simple paths that start in `from`, end in `to`, and
// leave both endpoint sets behind in between (first-exit normal form). This
// makes expansion deterministic and reversal-symmetric when the sets swap.
struct Connector {
  std::vector<int> from;
  std::vector<int> to;
  bool simple = true;
  int max_steps = 0;
};

struct CurveFamily {
  enum class Kind { Explicit, Connector };

  Kind kind = Kind::Explicit;
  std::vector<Curve> explicit_curves;
  Connector connector;

  // Optional restrictions, applied to both enumeration and separation:
  // members may only use `allowed` edges and must traverse at least one
  // `required` edge.
  std::optional<std::vector<char>> allowed;
  std::optional<std::vector<char>> required;

  static CurveFamily of_curves(std::vector<Curve> curves) {
    CurveFamily f;
    f.kind = Kind::Explicit;
    f.explicit_curves = std::move(curves);
    return f;
  }

  static CurveFamily connecting(std::vector<int> from, std::vector<int> to, int max_steps) {
    CurveFamily f;
    f.kind = Kind::Connector;
    std::sort(from.begin(), from.end());
    std::sort(to.begin(), to.end());
    f.connector = Connector{std::move(from), std::move(to), true, max_steps};
    return f;
  }
};

inline bool family_edge_allowed(const CurveFamily& f, int e) {
  return !f.allowed || (*f.allowed)[static_cast<std::size_t>(e)];
}

inline bool curve_passes_filters(const CurveFamily& f, const Curve& c) {
  for (const Step& s : c.steps)
    if (!family_edge_allowed(f, s.edge)) return false;
  if (f.required) {
    bool hit = false;
    for (const Step& s : c.steps)
      if ((*f.required)[static_cast<std::size_t>(s.edge)]) {
        hit = true;
        break;
      }
    if (!hit) return false;
  }
  return true;
}

namespace detail {

// Incident edges in (neighbor id, edge id) order, which makes the DFS emit
// curves in lexicographic order of their vertex id sequences.
inline std::vector<int> ordered_incident(const MetricGraph& g, int v) {
  std::vector<int> out = g.incident[static_cast<std::size_t>(v)];
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) {
    const std::string& na = g.vertex_ids[static_cast<std::size_t>(g.other_end(a, v))];
    const std::string& nb = g.vertex_ids[static_cast<std::size_t>(g.other_end(b, v))];
    if (na != nb) return na < nb;
    return g.edges[static_cast<std::size_t>(a)].id < g.edges[static_cast<std::size_t>(b)].id;
  });
  return out;
}

inline void enumerate_dfs(const MetricGraph& g, const CurveFamily& f, const std::vector<char>& in_from,
                          const std::vector<char>& in_to, int v, std::vector<Step>& path,
                          std::vector<char>& visited, std::size_t max_count, std::vector<Curve>& out) {
  if (static_cast<int>(path.size()) >= f.connector.max_steps) return;
  for (int e : ordered_incident(g, v)) {
    if (!family_edge_allowed(f, e)) continue;
    const int w = g.other_end(e, v);
    if (visited[static_cast<std::size_t>(w)]) continue;
    const Step s{e, g.edges[static_cast<std::size_t>(e)].u == v};
    path.push_back(s);
    if (in_to[static_cast<std::size_t>(w)]) {
      Curve c{path};
      if (curve_passes_filters(f, c)) {
        if (out.size() >= max_count)
          throw BudgetError("curve enumeration exceeded budget of " + std::to_string(max_count) + " curves");
        out.push_back(std::move(c));
      }
    } else if (!in_from[static_cast<std::size_t>(w)]) {
      visited[static_cast<std::size_t>(w)] = 1;
      enumerate_dfs(g, f, in_from, in_to, w, path, visited, max_count, out);
      visited[static_cast<std::size_t>(w)] = 0;
    }
    path.pop_back();
  }
}

}  // namespace detail

// Expands a family into an explicit curve list. Connector expansion is
// exhaustive and deterministic; exceeding `max_count` raises BudgetError
// rather than truncating.
inline std::vector<Curve> enumerate_curves(const MetricGraph& g, const CurveFamily& f,
                                           std::size_t max_count = 100000) {
  if (f.kind == CurveFamily::Kind::Explicit) {
    std::vector<Curve> out;
    for (const Curve& c : f.explicit_curves) {
      validate_curve(g, c);
      if (curve_passes_filters(f, c)) out.push_back(c);
    }
    if (out.size() > max_count)
      throw BudgetError("explicit family exceeds budget of " + std::to_string(max_count) + " curves");
    return out;
  }
  std::vector<char> in_from(g.vertex_count(), 0), in_to(g.vertex_count(), 0);
  for (int v : f.connector.from) in_from[static_cast<std::size_t>(v)] = 1;
  for (int v : f.connector.to) in_to[static_cast<std::size_t>(v)] = 1;
  std::vector<Curve> out;
  std::vector<Step> path;
  std::vector<char> visited(g.vertex_count(), 0);
  for (int a : f.connector.from) {
    std::fill(visited.begin(), visited.end(), 0);
    visited[static_cast<std::size_t>(a)] = 1;
    detail::enumerate_dfs(g, f, in_from, in_to, a, path, visited, max_count, out);
  }
  return out;
}

template <class R>
struct SeparationResult {
  bool has_curve = false;  // false when the family is empty
  R value{};
  Curve argmin;
};

namespace detail {

// Strips repeated vertices from a walk, keeping endpoints.
inline Curve strip_cycles(const MetricGraph& g, const Curve& walk) {
  std::vector<Step> steps = walk.steps;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> seq;
    seq.push_back(step_start(g, steps.front()));
    for (const Step& s : steps) seq.push_back(step_end(g, s));
    for (std::size_t i = 0; i < seq.size() && !changed; ++i)
      for (std::size_t j = seq.size(); j-- > i + 1 && !changed;)
        if (seq[i] == seq[j]) {
          steps.erase(steps.begin() + static_cast<std::ptrdiff_t>(i), steps.begin() + static_cast<std::ptrdiff_t>(j));
          changed = !steps.empty();
          if (steps.empty()) return Curve{};
        }
  }
  return Curve{steps};
}

// Shrinks a simple from->to path to first-exit normal form: start at the
// last `from` visit before the first `to` visit.
inline Curve first_exit_reduce(const MetricGraph& g, const Curve& c, const std::vector<char>& in_from,
                               const std::vector<char>& in_to) {
  std::vector<int> seq;
  seq.push_back(curve_start(g, c));
  for (const Step& s : c.steps) seq.push_back(step_end(g, s));
  std::size_t first_to = seq.size() - 1;
  for (std::size_t i = 1; i < seq.size(); ++i)
    if (in_to[static_cast<std::size_t>(seq[i])]) {
      first_to = i;
      break;
    }
  std::size_t last_from = 0;
  for (std::size_t i = 0; i < first_to; ++i)
    if (in_from[static_cast<std::size_t>(seq[i])]) last_from = i;
  return Curve{std::vector<Step>(c.steps.begin() + static_cast<std::ptrdiff_t>(last_from),
                                 c.steps.begin() + static_cast<std::ptrdiff_t>(first_to))};
}

}  // namespace detail

// Separation oracle: minimizes the line integral of `rho` over the family.
// Connector families use a hop-bounded dynamic program over walks, whose
// minimum coincides with the minimum over family members because cycle
// stripping and first-exit reduction only shrink nonnegative weight.
// Families with a `required` filter fall back to explicit enumeration.
template <class R>
SeparationResult<R> min_line_integral(const MetricGraph& g, const CurveFamily& f, const std::vector<R>& rho,
                                      std::size_t enum_budget = 100000) {
  for (const R& r : rho)
    if (r < R{}) throw InputError("separation: densities must be nonnegative");
  SeparationResult<R> best;
  auto consider = [&](const Curve& c) {
    const R v = line_integral(g, rho, c);
    if (!best.has_curve || v < best.value) {
      best.has_curve = true;
      best.value = v;
      best.argmin = c;
    }
  };
  if (f.kind == CurveFamily::Kind::Explicit || f.required) {
    for (const Curve& c : enumerate_curves(g, f, enum_budget)) consider(c);
    return best;
  }

  const Connector& cn = f.connector;
  std::vector<char> in_from(g.vertex_count(), 0), in_to(g.vertex_count(), 0);
  for (int v : cn.from) in_from[static_cast<std::size_t>(v)] = 1;
  for (int v : cn.to) in_to[static_cast<std::size_t>(v)] = 1;

  const std::size_t n = g.vertex_count();
  std::vector<std::optional<R>> dist(n);
  std::vector<Step> parent_step(n);
  std::vector<int> parent_vertex(n, -1);
  std::vector<std::optional<R>> next_dist(n);
  std::vector<std::optional<R>> final_best(n);
  std::vector<Curve> final_curve(n);

  for (int a : cn.from) dist[static_cast<std::size_t>(a)] = R{};

  // Rebuild the argmin walk from single-level parents by rerunning the DP
  // level by level; cheaper bookkeeping: store the full predecessor chain per
  // level instead. Desk-scale graphs make the simple O(K*E) table fine.
  std::vector<std::vector<std::optional<R>>> level_dist;
  std::vector<std::vector<std::pair<int, Step>>> level_parent;
  level_dist.push_back(dist);
  level_parent.emplace_back(n, std::pair<int, Step>{-1, Step{}});

  for (int k = 1; k <= cn.max_steps; ++k) {
    std::vector<std::optional<R>> cur(n);
    std::vector<std::pair<int, Step>> par(n, {-1, Step{}});
    const auto& prev = level_dist.back();
    for (std::size_t ei = 0; ei < g.edge_count(); ++ei) {
      if (!family_edge_allowed(f, static_cast<int>(ei))) continue;
      const Edge& e = g.edges[ei];
      const R w = rho[ei] * scalar_traits<R>::from_double(e.len);
      auto relax = [&](int from_v, int to_v, bool fwd) {
        if (!prev[static_cast<std::size_t>(from_v)]) return;
        if (in_to[static_cast<std::size_t>(from_v)] && k > 1) return;  // walks stop at first target hit
        const R cand = *prev[static_cast<std::size_t>(from_v)] + w;
        auto& cell = cur[static_cast<std::size_t>(to_v)];
        if (!cell || cand < *cell) {
          cell = cand;
          par[static_cast<std::size_t>(to_v)] = {from_v, Step{static_cast<int>(ei), fwd}};
        }
      };
      relax(e.u, e.v, true);
      relax(e.v, e.u, false);
    }
    level_dist.push_back(std::move(cur));
    level_parent.push_back(std::move(par));
    for (int b : cn.to) {
      const auto& cell = level_dist.back()[static_cast<std::size_t>(b)];
      if (!cell) continue;
      auto& fb = final_best[static_cast<std::size_t>(b)];
      if (!fb || *cell < *fb) {
        fb = *cell;
        // reconstruct the walk ending at b after k steps
        Curve walk;
        int v = b;
        for (int kk = k; kk >= 1; --kk) {
          const auto& [pv, st] = level_parent[static_cast<std::size_t>(kk)][static_cast<std::size_t>(v)];
          walk.steps.push_back(st);
          v = pv;
        }
        std::reverse(walk.steps.begin(), walk.steps.end());
        final_curve[static_cast<std::size_t>(b)] = std::move(walk);
      }
    }
  }

  for (int b : cn.to) {
    if (!final_best[static_cast<std::size_t>(b)]) continue;
    Curve walk = final_curve[static_cast<std::size_t>(b)];
    Curve stripped = detail::strip_cycles(g, walk);
    if (stripped.steps.empty()) continue;
    Curve member = detail::first_exit_reduce(g, stripped, in_from, in_to);
    if (member.steps.empty()) continue;
    consider(member);
  }
  return best;
}

// Zero-modulus test: the family has zero p-modulus for every p exactly when
// each member traverses at least one sigma-null edge, i.e. no member survives
// inside the sigma-positive subgraph.
struct ModZeroResult {
  bool is_zero = false;
  std::optional<Curve> witness;            // member avoiding null edges, when one exists
  std::vector<int> null_edge_certificate;  // sigma-null edges every member must cross
};

inline ModZeroResult mod_zero_check(const MetricGraph& g, const CurveFamily& f, std::size_t enum_budget = 100000) {
  ModZeroResult res;
  CurveFamily restricted = f;
  std::vector<char> allowed(g.edge_count(), 1);
  if (f.allowed) allowed = *f.allowed;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (g.edge_is_null(static_cast<int>(e))) allowed[e] = 0;
  restricted.allowed = allowed;

  if (f.kind == CurveFamily::Kind::Explicit) {
    for (const Curve& c : f.explicit_curves) {
      validate_curve(g, c);
      if (curve_passes_filters(f, c) && !curve_hits_null_edge(g, c)) {
        res.witness = c;
        break;
      }
    }
  } else {
    std::vector<double> ones(g.edge_count(), 1.0);
    // Hop-bounded reachability in the restricted graph; any surviving member
    // is a witness.
    if (restricted.required) {
      auto curves = enumerate_curves(g, restricted, enum_budget);
      if (!curves.empty()) res.witness = curves.front();
    } else {
      auto sep = min_line_integral<double>(g, restricted, ones, enum_budget);
      if (sep.has_curve) res.witness = sep.argmin;
    }
  }
  res.is_zero = !res.witness.has_value();
  if (res.is_zero) {
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      if (g.edge_is_null(static_cast<int>(e)) && family_edge_allowed(f, static_cast<int>(e)))
        res.null_edge_certificate.push_back(static_cast<int>(e));
  }
  return res;
}

// Membership test. Connector members are in first-exit normal form: they
// start in `from`, end in `to`, and touch neither set in between.
inline bool curve_in_family(const MetricGraph& g, const CurveFamily& f, const Curve& c) {
  if (c.steps.empty()) return false;
  if (!curve_passes_filters(f, c)) return false;
  if (f.kind == CurveFamily::Kind::Explicit) {
    for (const Curve& e : f.explicit_curves)
      if (e == c) return true;
    return false;
  }
  const Connector& cn = f.connector;
  if (static_cast<int>(c.steps.size()) > cn.max_steps) return false;
  if (cn.simple && !curve_is_simple(g, c)) return false;
  auto in = [](const std::vector<int>& set, int v) { return std::binary_search(set.begin(), set.end(), v); };
  if (!in(cn.from, curve_start(g, c)) || !in(cn.to, curve_end(g, c))) return false;
  int v = curve_start(g, c);
  for (std::size_t i = 0; i + 1 < c.steps.size(); ++i) {
    v = step_end(g, c.steps[i]);
    if (in(cn.from, v) || in(cn.to, v)) return false;
  }
  return true;
}

// Reversal closure of an explicit curve set.
inline bool reversal_closed(const std::vector<Curve>& curves) {
  std::vector<Curve> sorted = curves;
  std::sort(sorted.begin(), sorted.end());
  for (const Curve& c : curves) {
    const Curve r = reverse_curve(c);
    if (!std::binary_search(sorted.begin(), sorted.end(), r)) return false;
  }
  return true;
}

}  // namespace modgrad
