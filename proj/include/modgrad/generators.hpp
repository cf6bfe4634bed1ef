#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "modgrad/family.hpp"
#include "modgrad/graph.hpp"

namespace modgrad {

namespace detail {

inline std::string padded(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

inline int digits_for(int count) {
  int width = 1;
  for (int v = count - 1; v >= 10; v /= 10) ++width;
  return width;
}

struct LatticeBuilder {
  int nx, ny;
  double h;
  int wx, wy;
  std::vector<std::string> vertex_ids;
  std::vector<Edge> edges;
  std::map<std::string, std::array<double, 2>> coords;

  LatticeBuilder(int nx_, int ny_, double h_) : nx(nx_), ny(ny_), h(h_) {
    if (nx < 2 || ny < 1) throw InputError("lattice generators require nx >= 2 and ny >= 1");
    if (!(h > 0)) throw InputError("lattice generators require h > 0");
    wx = digits_for(nx);
    wy = digits_for(ny);
  }

  std::string vid(int i, int j) const { return "v" + padded(i, wx) + "_" + padded(j, wy); }

  void add_vertices() {
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) {
        vertex_ids.push_back(vid(i, j));
        coords[vid(i, j)] = {h * i, h * j};
      }
  }
};

}  // namespace detail

// Square lattice with nx*ny vertices, spacing h, every edge weighted by the
// cell area it represents: l(e) = h, sigma(e) = h^2/2.
inline MetricGraph make_grid(int nx, int ny, double h) {
  detail::LatticeBuilder b(nx, ny, h);
  b.add_vertices();
  std::map<std::string, int> idx;
  {
    std::vector<std::string> sorted = b.vertex_ids;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) idx[sorted[i]] = static_cast<int>(i);
  }
  const double sigma = h * h / 2;
  for (int i = 0; i + 1 < nx; ++i)
    for (int j = 0; j < ny; ++j)
      b.edges.push_back({"eh" + detail::padded(i, b.wx) + "_" + detail::padded(j, b.wy), idx[b.vid(i, j)],
                         idx[b.vid(i + 1, j)], h, sigma});
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j + 1 < ny; ++j)
      b.edges.push_back({"ev" + detail::padded(i, b.wx) + "_" + detail::padded(j, b.wy), idx[b.vid(i, j)],
                         idx[b.vid(i, j + 1)], h, sigma});
  return make_graph(b.vertex_ids, b.edges, b.coords);
}

// Grid whose vertical edges carry zero measure: metrically present, measure
// theoretically invisible.
inline MetricGraph make_rug(int nx, int ny, double h) {
  MetricGraph g = make_grid(nx, ny, h);
  std::vector<Edge> edges = g.edges;
  for (Edge& e : edges)
    if (e.id.rfind("ev", 0) == 0) e.measure = 0;
  return make_graph(g.vertex_ids, edges, g.coords);
}

// k disjoint paths of m unit edges with unit measure.
inline MetricGraph make_parallel_paths(int k, int m) {
  if (k < 1 || m < 1) throw InputError("parallel_paths requires k >= 1 and m >= 1");
  const int wk = detail::digits_for(k);
  const int wm = detail::digits_for(m + 1);
  std::vector<std::string> vertex_ids;
  std::map<std::string, std::array<double, 2>> coords;
  auto vid = [&](int a, int j) { return "v" + detail::padded(a, wk) + "_" + detail::padded(j, wm); };
  for (int a = 0; a < k; ++a)
    for (int j = 0; j <= m; ++j) {
      vertex_ids.push_back(vid(a, j));
      coords[vid(a, j)] = {static_cast<double>(j), static_cast<double>(a)};
    }
  std::map<std::string, int> idx;
  {
    std::vector<std::string> sorted = vertex_ids;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) idx[sorted[i]] = static_cast<int>(i);
  }
  std::vector<Edge> edges;
  for (int a = 0; a < k; ++a)
    for (int j = 0; j < m; ++j)
      edges.push_back({"e" + detail::padded(a, wk) + "_" + detail::padded(j, wm), idx[vid(a, j)], idx[vid(a, j + 1)],
                       1.0, 1.0});
  return make_graph(vertex_ids, edges, coords);
}

// Sierpinski-carpet lattice at the given level on the unit square: cells
// whose base-3 address contains the middle digit pair are removed, and each
// edge carries a quarter of the area of each surviving cell beside it.
inline MetricGraph make_carpet(int level) {
  if (level < 1 || level > 6) throw InputError("carpet level must be between 1 and 6");
  int cells = 1;
  for (int i = 0; i < level; ++i) cells *= 3;
  const int n = cells + 1;
  const double h = 1.0 / cells;
  auto removed = [&](int ci, int cj) {
    for (int k = 0; k < level; ++k) {
      if (ci % 3 == 1 && cj % 3 == 1) return true;
      ci /= 3;
      cj /= 3;
    }
    return false;
  };
  detail::LatticeBuilder b(n, n, h);
  b.add_vertices();
  std::map<std::string, int> idx;
  {
    std::vector<std::string> sorted = b.vertex_ids;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) idx[sorted[i]] = static_cast<int>(i);
  }
  auto cell_alive = [&](int ci, int cj) {
    return ci >= 0 && cj >= 0 && ci < cells && cj < cells && !removed(ci, cj);
  };
  const double quarter = h * h / 4;
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i)
    for (int j = 0; j < n; ++j) {
      // horizontal edge (i,j)-(i+1,j) borders cells (i, j-1) and (i, j)
      double sigma = 0;
      if (cell_alive(i, j - 1)) sigma += quarter;
      if (cell_alive(i, j)) sigma += quarter;
      edges.push_back({"eh" + detail::padded(i, b.wx) + "_" + detail::padded(j, b.wy), idx[b.vid(i, j)],
                       idx[b.vid(i + 1, j)], h, sigma});
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j + 1 < n; ++j) {
      double sigma = 0;
      if (cell_alive(i - 1, j)) sigma += quarter;
      if (cell_alive(i, j)) sigma += quarter;
      edges.push_back({"ev" + detail::padded(i, b.wx) + "_" + detail::padded(j, b.wy), idx[b.vid(i, j)],
                       idx[b.vid(i, j + 1)], h, sigma});
    }
  return make_graph(b.vertex_ids, edges, b.coords);
}

// Disjoint union with id prefixes; the second component's coordinates can be
// shifted so both pieces live in one plane.
inline MetricGraph make_disjoint_union(const MetricGraph& a, const MetricGraph& b, const std::string& pa,
                                       const std::string& pb, double dx = 0, double dy = 0) {
  std::vector<std::string> ids;
  std::map<std::string, std::array<double, 2>> coords;
  for (const std::string& id : a.vertex_ids) ids.push_back(pa + id);
  for (const std::string& id : b.vertex_ids) ids.push_back(pb + id);
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::map<std::string, int> idx;
  for (std::size_t i = 0; i < sorted.size(); ++i) idx[sorted[i]] = static_cast<int>(i);
  std::vector<Edge> edges;
  for (const Edge& e : a.edges)
    edges.push_back({pa + e.id, idx[pa + a.vertex_ids[static_cast<std::size_t>(e.u)]],
                     idx[pa + a.vertex_ids[static_cast<std::size_t>(e.v)]], e.len, e.measure});
  for (const Edge& e : b.edges)
    edges.push_back({pb + e.id, idx[pb + b.vertex_ids[static_cast<std::size_t>(e.u)]],
                     idx[pb + b.vertex_ids[static_cast<std::size_t>(e.v)]], e.len, e.measure});
  for (const auto& [id, xy] : a.coords) coords[pa + id] = xy;
  for (const auto& [id, xy] : b.coords) coords[pb + id] = {xy[0] + dx, xy[1] + dy};
  return make_graph(std::move(ids), std::move(edges), std::move(coords));
}

// Connecting family between the extreme coordinate classes of a generated
// space: axis 0 connects min-x to max-x vertices, axis 1 min-y to max-y.
inline CurveFamily crossing_family(const MetricGraph& g, int axis = 0, int max_steps = 0) {
  if (g.coords.empty()) throw InputError("crossing_family requires coordinate metadata");
  if (axis != 0 && axis != 1) throw InputError("crossing_family: axis must be 0 or 1");
  double lo = std::numeric_limits<double>::infinity(), hi = -std::numeric_limits<double>::infinity();
  for (const auto& [id, xy] : g.coords) {
    lo = std::min(lo, xy[static_cast<std::size_t>(axis)]);
    hi = std::max(hi, xy[static_cast<std::size_t>(axis)]);
  }
  if (!(lo < hi)) throw InputError("crossing_family: degenerate coordinate range");
  std::vector<int> from, to;
  for (const auto& [id, xy] : g.coords) {
    if (xy[static_cast<std::size_t>(axis)] == lo) from.push_back(g.vertex(id));
    if (xy[static_cast<std::size_t>(axis)] == hi) to.push_back(g.vertex(id));
  }
  if (max_steps <= 0) max_steps = static_cast<int>(g.vertex_count());
  return CurveFamily::connecting(std::move(from), std::move(to), max_steps);
}

}  // namespace modgrad
