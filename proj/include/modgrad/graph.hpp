#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "modgrad/errors.hpp"
#include "modgrad/rational.hpp"

namespace modgrad {

struct Edge {
  std::string id;
  int u = -1;  // tail under canonical orientation
  int v = -1;  // head under canonical orientation
  double len = 0;      // l(e) > 0
  double measure = 0;  // sigma(e) >= 0, the mu-weight carried by the edge
};

// Finite metric graph: vertices, weighted edges, and the measure sigma.
// Vertices and edges are kept sorted by id; all tie-breaks in the library
// refer to this canonical index order.
struct MetricGraph {
  std::vector<std::string> vertex_ids;
  std::vector<Edge> edges;
  std::map<std::string, std::array<double, 2>> coords;  // optional generator metadata

  std::map<std::string, int> vertex_index;
  std::map<std::string, int> edge_index;
  std::vector<std::vector<int>> incident;  // vertex -> incident edge indices, ascending

  int vertex(const std::string& id) const {
    auto it = vertex_index.find(id);
    if (it == vertex_index.end()) throw InputError("unknown vertex id '" + id + "'");
    return it->second;
  }

  int edge(const std::string& id) const {
    auto it = edge_index.find(id);
    if (it == edge_index.end()) throw InputError("unknown edge id '" + id + "'");
    return it->second;
  }

  int other_end(int e, int at) const {
    const Edge& ed = edges[static_cast<std::size_t>(e)];
    return ed.u == at ? ed.v : ed.u;
  }

  std::size_t vertex_count() const { return vertex_ids.size(); }
  std::size_t edge_count() const { return edges.size(); }

  bool edge_is_null(int e) const { return edges[static_cast<std::size_t>(e)].measure == 0; }

  double total_measure() const {
    double s = 0;
    for (const Edge& e : edges) s += e.measure;
    return s;
  }

  // Star measure: each incident edge contributes half of its sigma, so the
  // star measures sum to mu(X).
  double star_measure(int v) const {
    double s = 0;
    for (int e : incident[static_cast<std::size_t>(v)]) s += edges[static_cast<std::size_t>(e)].measure / 2;
    return s;
  }

  // Degree counting only sigma-positive edges.
  int positive_degree(int v) const {
    int d = 0;
    for (int e : incident[static_cast<std::size_t>(v)])
      if (!edge_is_null(e)) ++d;
    return d;
  }

  std::vector<int> connected_component(int v0) const {
    std::vector<int> comp;
    std::vector<char> seen(vertex_count(), 0);
    std::vector<int> stack{v0};
    seen[static_cast<std::size_t>(v0)] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (int e : incident[static_cast<std::size_t>(v)]) {
        int w = other_end(e, v);
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          stack.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    return comp;
  }

  // Path metric: Dijkstra over edge lengths.
  std::vector<double> distances_from(int v0) const {
    std::vector<double> dist(vertex_count(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[static_cast<std::size_t>(v0)] = 0;
    pq.emplace(0.0, v0);
    while (!pq.empty()) {
      auto [d, v] = pq.top();
      pq.pop();
      if (d > dist[static_cast<std::size_t>(v)]) continue;
      for (int e : incident[static_cast<std::size_t>(v)]) {
        const double nd = d + edges[static_cast<std::size_t>(e)].len;
        const int w = other_end(e, v);
        if (nd < dist[static_cast<std::size_t>(w)]) {
          dist[static_cast<std::size_t>(w)] = nd;
          pq.emplace(nd, w);
        }
      }
    }
    return dist;
  }
};

inline MetricGraph make_graph(std::vector<std::string> vertex_ids, std::vector<Edge> edge_list,
                              std::map<std::string, std::array<double, 2>> coords = {}) {
  MetricGraph g;
  std::sort(vertex_ids.begin(), vertex_ids.end());
  for (std::size_t i = 0; i + 1 < vertex_ids.size(); ++i)
    if (vertex_ids[i] == vertex_ids[i + 1]) throw InputError("duplicate vertex id '" + vertex_ids[i] + "'");
  g.vertex_ids = std::move(vertex_ids);
  for (std::size_t i = 0; i < g.vertex_ids.size(); ++i) g.vertex_index[g.vertex_ids[i]] = static_cast<int>(i);

  std::sort(edge_list.begin(), edge_list.end(), [](const Edge& a, const Edge& b) { return a.id < b.id; });
  for (std::size_t i = 0; i + 1 < edge_list.size(); ++i)
    if (edge_list[i].id == edge_list[i + 1].id) throw InputError("duplicate edge id '" + edge_list[i].id + "'");
  g.edges = std::move(edge_list);
  g.incident.assign(g.vertex_ids.size(), {});
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    Edge& e = g.edges[i];
    if (!(e.len > 0) || !std::isfinite(e.len))
      throw InputError("edge '" + e.id + "': length must be positive and finite");
    if (e.measure < 0 || !std::isfinite(e.measure))
      throw InputError("edge '" + e.id + "': measure must be nonnegative and finite");
    if (e.u < 0 || e.v < 0 || e.u >= static_cast<int>(g.vertex_ids.size()) || e.v >= static_cast<int>(g.vertex_ids.size()))
      throw InputError("edge '" + e.id + "': endpoint out of range");
    if (e.u == e.v) throw InputError("edge '" + e.id + "': self loops are not supported");
    g.incident[static_cast<std::size_t>(e.u)].push_back(static_cast<int>(i));
    g.incident[static_cast<std::size_t>(e.v)].push_back(static_cast<int>(i));
    g.edge_index[e.id] = static_cast<int>(i);
  }
  g.coords = std::move(coords);
  return g;
}

// A point class of the underlying measure: either the interior of an edge or
// the star around a vertex.
enum class LocationKind { EdgePoint, VertexStar };

struct Location {
  LocationKind kind = LocationKind::EdgePoint;
  int index = -1;

  friend bool operator==(const Location&, const Location&) = default;
  friend auto operator<=>(const Location&, const Location&) = default;
};

inline Location edge_point(int e) { return {LocationKind::EdgePoint, e}; }
inline Location vertex_star(int v) { return {LocationKind::VertexStar, v}; }

inline std::string location_id(const MetricGraph& g, const Location& x) {
  if (x.kind == LocationKind::EdgePoint) return "edge:" + g.edges[static_cast<std::size_t>(x.index)].id;
  return "star:" + g.vertex_ids[static_cast<std::size_t>(x.index)];
}

inline Location parse_location(const MetricGraph& g, const std::string& id) {
  if (id.rfind("edge:", 0) == 0) return edge_point(g.edge(id.substr(5)));
  if (id.rfind("star:", 0) == 0) return vertex_star(g.vertex(id.substr(5)));
  throw InputError("location id '" + id + "' must start with 'edge:' or 'star:'");
}

inline double location_measure(const MetricGraph& g, const Location& x) {
  if (x.kind == LocationKind::EdgePoint) return g.edges[static_cast<std::size_t>(x.index)].measure;
  return g.star_measure(x.index);
}

// Exceptional locations carry no measure reachable by sigma-positive edges.
inline bool location_exceptional(const MetricGraph& g, const Location& x) {
  if (x.kind == LocationKind::EdgePoint) return g.edge_is_null(x.index);
  return g.positive_degree(x.index) == 0;
}

inline std::vector<Location> all_locations(const MetricGraph& g, LocationKind kind) {
  std::vector<Location> out;
  if (kind == LocationKind::EdgePoint) {
    out.reserve(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) out.push_back(edge_point(static_cast<int>(e)));
  } else {
    out.reserve(g.vertex_count());
    for (std::size_t v = 0; v < g.vertex_count(); ++v) out.push_back(vertex_star(static_cast<int>(v)));
  }
  return out;
}

}  // namespace modgrad
