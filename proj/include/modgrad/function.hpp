#pragma once

#include <functional>
#include <string>
#include <vector>

#include "modgrad/curve.hpp"
#include "modgrad/graph.hpp"
#include "modgrad/rational.hpp"

namespace modgrad {

// Real-valued function on vertices. Values are kept as exact rationals (file
// input is dyadic, generated fixtures are rational) with a float mirror for
// the numeric paths.
struct VertexFunction {
  std::vector<Rational> values;
  std::vector<double> values_d;

  static VertexFunction zero(const MetricGraph& g) {
    VertexFunction f;
    f.values.assign(g.vertex_count(), Rational(0));
    f.values_d.assign(g.vertex_count(), 0.0);
    return f;
  }

  static VertexFunction of(const MetricGraph& g, const std::function<Rational(int)>& fn) {
    VertexFunction f;
    f.values.reserve(g.vertex_count());
    f.values_d.reserve(g.vertex_count());
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
      f.values.push_back(fn(static_cast<int>(v)));
      f.values_d.push_back(to_double(f.values.back()));
    }
    return f;
  }

  static VertexFunction of_doubles(const MetricGraph& g, const std::function<double(int)>& fn) {
    return of(g, [&](int v) { return rat_of(fn(v)); });
  }

  const Rational& at(int v) const { return values[static_cast<std::size_t>(v)]; }
  double at_d(int v) const { return values_d[static_cast<std::size_t>(v)]; }

  // Increment along the canonical orientation: f(head) - f(tail).
  Rational delta(const MetricGraph& g, int e) const {
    const Edge& ed = g.edges[static_cast<std::size_t>(e)];
    return values[static_cast<std::size_t>(ed.v)] - values[static_cast<std::size_t>(ed.u)];
  }

  double delta_d(const MetricGraph& g, int e) const {
    const Edge& ed = g.edges[static_cast<std::size_t>(e)];
    return values_d[static_cast<std::size_t>(ed.v)] - values_d[static_cast<std::size_t>(ed.u)];
  }

  // Slope of f along the edge: delta / length, the discrete |(f o gamma)'|
  // on a unit-speed traversal.
  Rational slope(const MetricGraph& g, int e) const {
    return delta(g, e) / rat_of(g.edges[static_cast<std::size_t>(e)].len);
  }

  double slope_d(const MetricGraph& g, int e) const {
    return delta_d(g, e) / g.edges[static_cast<std::size_t>(e)].len;
  }

  Rational increment_along(const MetricGraph& g, const Curve& c) const {
    return values[static_cast<std::size_t>(curve_end(g, c))] - values[static_cast<std::size_t>(curve_start(g, c))];
  }

  friend VertexFunction operator+(const VertexFunction& a, const VertexFunction& b) {
    VertexFunction r = a;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      r.values[i] += b.values[i];
      r.values_d[i] = to_double(r.values[i]);
    }
    return r;
  }

  friend VertexFunction operator*(const Rational& c, const VertexFunction& a) {
    VertexFunction r = a;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      r.values[i] *= c;
      r.values_d[i] = to_double(r.values[i]);
    }
    return r;
  }

  friend VertexFunction operator*(const VertexFunction& a, const VertexFunction& b) {
    VertexFunction r = a;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      r.values[i] *= b.values[i];
      r.values_d[i] = to_double(r.values[i]);
    }
    return r;
  }
};

// Coordinate projection from generator metadata.
inline VertexFunction coordinate_function(const MetricGraph& g, int axis) {
  if (g.coords.empty()) throw InputError("coordinate_function requires coordinate metadata");
  return VertexFunction::of(g, [&](int v) {
    const auto it = g.coords.find(g.vertex_ids[static_cast<std::size_t>(v)]);
    if (it == g.coords.end()) throw InputError("vertex '" + g.vertex_ids[static_cast<std::size_t>(v)] + "' has no coordinates");
    return rat_of(it->second[static_cast<std::size_t>(axis)]);
  });
}

// Sparse multivariate monomial sum over the coordinate functions.
struct PolyTerm {
  double coef = 0;
  int px = 0;
  int py = 0;
};

inline VertexFunction polynomial_function(const MetricGraph& g, const std::vector<PolyTerm>& terms) {
  if (g.coords.empty()) throw InputError("polynomial functions require coordinate metadata");
  return VertexFunction::of(g, [&](int v) {
    const auto it = g.coords.find(g.vertex_ids[static_cast<std::size_t>(v)]);
    if (it == g.coords.end()) throw InputError("vertex '" + g.vertex_ids[static_cast<std::size_t>(v)] + "' has no coordinates");
    const Rational x = rat_of(it->second[0]);
    const Rational y = rat_of(it->second[1]);
    Rational acc(0);
    for (const PolyTerm& t : terms) acc += rat_of(t.coef) * rat_pow(x, t.px) * rat_pow(y, t.py);
    return acc;
  });
}

}  // namespace modgrad
