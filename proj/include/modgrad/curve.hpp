#pragma once

#include <string>
#include <vector>

#include "modgrad/graph.hpp"

namespace modgrad {

struct Step {
  int edge = -1;
  bool forward = true;  // true: traversed u -> v

  friend bool operator==(const Step&, const Step&) = default;
  friend auto operator<=>(const Step&, const Step&) = default;
};

// A curve is a nonempty chain of oriented edge traversals, parametrized by
// constant speed equal to its length. Edges may repeat.
struct Curve {
  std::vector<Step> steps;

  friend bool operator==(const Curve&, const Curve&) = default;
  friend auto operator<=>(const Curve&, const Curve&) = default;
};

inline int step_start(const MetricGraph& g, const Step& s) {
  const Edge& e = g.edges[static_cast<std::size_t>(s.edge)];
  return s.forward ? e.u : e.v;
}

inline int step_end(const MetricGraph& g, const Step& s) {
  const Edge& e = g.edges[static_cast<std::size_t>(s.edge)];
  return s.forward ? e.v : e.u;
}

inline void validate_curve(const MetricGraph& g, const Curve& c) {
  if (c.steps.empty()) throw InputError("curve must have at least one step (constant curves are excluded)");
  for (const Step& s : c.steps)
    if (s.edge < 0 || s.edge >= static_cast<int>(g.edge_count())) throw InputError("curve step references unknown edge");
  for (std::size_t i = 0; i + 1 < c.steps.size(); ++i)
    if (step_end(g, c.steps[i]) != step_start(g, c.steps[i + 1]))
      throw InputError("curve steps do not chain: step " + std::to_string(i) + " ends at '" +
                       g.vertex_ids[static_cast<std::size_t>(step_end(g, c.steps[i]))] + "' but step " +
                       std::to_string(i + 1) + " starts elsewhere");
}

inline int curve_start(const MetricGraph& g, const Curve& c) { return step_start(g, c.steps.front()); }
inline int curve_end(const MetricGraph& g, const Curve& c) { return step_end(g, c.steps.back()); }

inline double curve_length(const MetricGraph& g, const Curve& c) {
  double len = 0;
  for (const Step& s : c.steps) len += g.edges[static_cast<std::size_t>(s.edge)].len;
  return len;
}

// Traversal multiplicity n_gamma(e).
inline std::vector<int> curve_multiplicity(const MetricGraph& g, const Curve& c) {
  std::vector<int> n(g.edge_count(), 0);
  for (const Step& s : c.steps) ++n[static_cast<std::size_t>(s.edge)];
  return n;
}

inline Curve reverse_curve(const Curve& c) {
  Curve r;
  r.steps.reserve(c.steps.size());
  for (auto it = c.steps.rbegin(); it != c.steps.rend(); ++it) r.steps.push_back({it->edge, !it->forward});
  return r;
}

inline Curve concat_curves(const MetricGraph& g, const Curve& a, const Curve& b) {
  if (curve_end(g, a) != curve_start(g, b)) throw InputError("concat: curves do not share an endpoint");
  Curve c = a;
  c.steps.insert(c.steps.end(), b.steps.begin(), b.steps.end());
  return c;
}

inline bool curve_is_simple(const MetricGraph& g, const Curve& c) {
  std::vector<int> seq;
  seq.push_back(curve_start(g, c));
  for (const Step& s : c.steps) seq.push_back(step_end(g, s));
  std::sort(seq.begin(), seq.end());
  return std::adjacent_find(seq.begin(), seq.end()) == seq.end();
}

inline bool curve_hits_null_edge(const MetricGraph& g, const Curve& c) {
  for (const Step& s : c.steps)
    if (g.edge_is_null(s.edge)) return true;
  return false;
}

inline bool curve_all_null(const MetricGraph& g, const Curve& c) {
  for (const Step& s : c.steps)
    if (!g.edge_is_null(s.edge)) return false;
  return true;
}

// Integral of a Borel density along the constant-speed parametrization:
// sum over steps of rho(edge) * l(edge), so repeated edges count with
// multiplicity.
template <class R>
R line_integral(const MetricGraph& g, const std::vector<R>& rho, const Curve& c) {
  R acc{};
  for (const Step& s : c.steps) {
    const Edge& e = g.edges[static_cast<std::size_t>(s.edge)];
    acc += rho[static_cast<std::size_t>(s.edge)] * scalar_traits<R>::from_double(e.len);
  }
  return acc;
}

inline std::string curve_to_string(const MetricGraph& g, const Curve& c) {
  std::string out;
  out += g.vertex_ids[static_cast<std::size_t>(curve_start(g, c))];
  for (const Step& s : c.steps) {
    out += " -";
    out += g.edges[static_cast<std::size_t>(s.edge)].id;
    out += s.forward ? "+" : "-";
    out += "-> ";
    out += g.vertex_ids[static_cast<std::size_t>(step_end(g, s))];
  }
  return out;
}

}  // namespace modgrad
