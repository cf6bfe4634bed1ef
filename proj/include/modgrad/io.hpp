#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "modgrad/curve.hpp"
#include "modgrad/errors.hpp"
#include "modgrad/family.hpp"
#include "modgrad/function.hpp"
#include "modgrad/graph.hpp"

namespace modgrad {

using Json = nlohmann::json;

// Canonical float form: up to 17 significant digits, enough to round-trip a
// double, with a stable textual shape across platforms.
inline std::string canonical_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail {

// Minimal writer so numeric formatting stays under our control; nlohmann
// would emit shortest-round-trip floats, which is a different canonical form.
class JsonWriter {
 public:
  std::string str() const { return out_; }

  void begin_object() { out_ += '{'; }
  void end_object() { out_ += '}'; }
  void begin_array() { out_ += '['; }
  void end_array() { out_ += ']'; }
  void comma() { out_ += ','; }
  void key(const std::string& k) {
    string(k);
    out_ += ':';
  }
  void string(const std::string& s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        case '\r': out_ += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += c;
          }
      }
    }
    out_ += '"';
  }
  void number(double x) { out_ += canonical_double(x); }
  void integer(long long v) { out_ += std::to_string(v); }
  void boolean(bool b) { out_ += b ? "true" : "false"; }

 private:
  std::string out_;
};

inline const Json& require_member(const Json& j, const std::string& name, const std::string& path) {
  if (!j.is_object()) throw InputError(path + ": expected an object");
  auto it = j.find(name);
  if (it == j.end()) throw InputError(path + ": missing member \"" + name + "\"");
  return *it;
}

inline std::string require_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw InputError(path + ": expected a string");
  return j.get<std::string>();
}

inline double require_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path + ": expected a number");
  return j.get<double>();
}

inline const Json& require_array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw InputError(path + ": expected an array");
  return j;
}

}  // namespace detail

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << content;
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(origin + ": " + e.what());
  }
}

// ---- space ----

inline MetricGraph space_from_json(const Json& j, const std::string& origin = "space") {
  using detail::require_array;
  using detail::require_member;
  using detail::require_number;
  using detail::require_string;
  const Json& jverts = require_array(require_member(j, "vertices", origin), origin + ".vertices");
  std::vector<std::string> ids;
  std::map<std::string, std::array<double, 2>> coords;
  for (std::size_t i = 0; i < jverts.size(); ++i) {
    const std::string path = origin + ".vertices[" + std::to_string(i) + "]";
    ids.push_back(require_string(require_member(jverts[i], "id", path), path + ".id"));
  }
  const Json& jedges = require_array(require_member(j, "edges", origin), origin + ".edges");
  std::vector<Edge> edges;
  std::map<std::string, int> vidx;
  {
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (vidx.count(sorted[i])) throw InputError(origin + ".vertices: duplicate id \"" + sorted[i] + "\"");
      vidx[sorted[i]] = static_cast<int>(i);
    }
  }
  for (std::size_t i = 0; i < jedges.size(); ++i) {
    const std::string path = origin + ".edges[" + std::to_string(i) + "]";
    Edge e;
    e.id = require_string(require_member(jedges[i], "id", path), path + ".id");
    const std::string u = require_string(require_member(jedges[i], "u", path), path + ".u");
    const std::string v = require_string(require_member(jedges[i], "v", path), path + ".v");
    if (!vidx.count(u)) throw InputError(path + ".u: unknown vertex \"" + u + "\"");
    if (!vidx.count(v)) throw InputError(path + ".v: unknown vertex \"" + v + "\"");
    e.u = vidx[u];
    e.v = vidx[v];
    e.len = require_number(require_member(jedges[i], "len", path), path + ".len");
    e.measure = require_number(require_member(jedges[i], "measure", path), path + ".measure");
    if (!(e.len > 0)) throw InputError(path + ".len: must be positive");
    if (e.measure < 0) throw InputError(path + ".measure: must be nonnegative");
    edges.push_back(std::move(e));
  }
  if (j.contains("coords")) {
    const Json& jc = j["coords"];
    if (!jc.is_object()) throw InputError(origin + ".coords: expected an object");
    for (auto it = jc.begin(); it != jc.end(); ++it) {
      const std::string path = origin + ".coords[\"" + it.key() + "\"]";
      if (!vidx.count(it.key())) throw InputError(path + ": unknown vertex");
      const Json& pair = require_array(it.value(), path);
      if (pair.size() != 2) throw InputError(path + ": expected [x, y]");
      coords[it.key()] = {require_number(pair[0], path + "[0]"), require_number(pair[1], path + "[1]")};
    }
  }
  try {
    return make_graph(ids, edges, coords);
  } catch (const InputError& e) {
    throw InputError(origin + ": " + e.what());
  }
}

inline std::string space_to_json(const MetricGraph& g) {
  detail::JsonWriter w;
  w.begin_object();
  if (!g.coords.empty()) {
    w.key("coords");
    w.begin_object();
    bool first = true;
    for (const auto& [id, xy] : g.coords) {  // std::map iterates in sorted key order
      if (!first) w.comma();
      first = false;
      w.key(id);
      w.begin_array();
      w.number(xy[0]);
      w.comma();
      w.number(xy[1]);
      w.end_array();
    }
    w.end_object();
    w.comma();
  }
  w.key("edges");
  w.begin_array();
  std::vector<std::size_t> order(g.edge_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return g.edges[a].id < g.edges[b].id; });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Edge& e = g.edges[order[k]];
    if (k) w.comma();
    w.begin_object();
    w.key("id");
    w.string(e.id);
    w.comma();
    w.key("len");
    w.number(e.len);
    w.comma();
    w.key("measure");
    w.number(e.measure);
    w.comma();
    w.key("u");
    w.string(g.vertex_ids[static_cast<std::size_t>(e.u)]);
    w.comma();
    w.key("v");
    w.string(g.vertex_ids[static_cast<std::size_t>(e.v)]);
    w.end_object();
  }
  w.end_array();
  w.comma();
  w.key("vertices");
  w.begin_array();
  std::vector<std::string> vids = g.vertex_ids;
  std::sort(vids.begin(), vids.end());
  for (std::size_t i = 0; i < vids.size(); ++i) {
    if (i) w.comma();
    w.begin_object();
    w.key("id");
    w.string(vids[i]);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  std::string s = w.str();
  s += '\n';
  return s;
}

// ---- curves and families ----

inline Curve curve_from_json(const MetricGraph& g, const Json& j, const std::string& path) {
  const Json& steps = detail::require_array(j, path);
  Curve c;
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const std::string sp = path + "[" + std::to_string(s) + "]";
    const Json& st = detail::require_array(steps[s], sp);
    if (st.size() != 2) throw InputError(sp + ": expected [edge_id, \"+\"|\"-\"]");
    const std::string id = detail::require_string(st[0], sp + "[0]");
    const std::string dir = detail::require_string(st[1], sp + "[1]");
    if (dir != "+" && dir != "-") throw InputError(sp + "[1]: direction must be \"+\" or \"-\"");
    int e;
    try {
      e = g.edge(id);
    } catch (const InputError&) {
      throw InputError(sp + "[0]: unknown edge \"" + id + "\"");
    }
    c.steps.push_back({e, dir == "+"});
  }
  try {
    validate_curve(g, c);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
  return c;
}

inline void curve_to_json(detail::JsonWriter& w, const MetricGraph& g, const Curve& c) {
  w.begin_array();
  for (std::size_t s = 0; s < c.steps.size(); ++s) {
    if (s) w.comma();
    w.begin_array();
    w.string(g.edges[static_cast<std::size_t>(c.steps[s].edge)].id);
    w.comma();
    w.string(c.steps[s].forward ? "+" : "-");
    w.end_array();
  }
  w.end_array();
}

inline CurveFamily family_from_json(const MetricGraph& g, const Json& j, const std::string& origin = "family") {
  using detail::require_array;
  using detail::require_member;
  using detail::require_string;
  if (!j.is_object()) throw InputError(origin + ": expected an object");
  const bool has_explicit = j.contains("explicit");
  const bool has_connector = j.contains("connector");
  if (has_explicit == has_connector)
    throw InputError(origin + ": exactly one of \"explicit\" or \"connector\" is required");
  CurveFamily f;
  if (has_explicit) {
    const Json& arr = require_array(j["explicit"], origin + ".explicit");
    std::vector<Curve> curves;
    for (std::size_t i = 0; i < arr.size(); ++i)
      curves.push_back(curve_from_json(g, arr[i], origin + ".explicit[" + std::to_string(i) + "]"));
    f = CurveFamily::of_curves(std::move(curves));
  } else {
    const Json& c = j["connector"];
    const std::string path = origin + ".connector";
    auto read_side = [&](const char* name) {
      const Json& arr = require_array(require_member(c, name, path), path + "." + name);
      std::vector<int> out;
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string id = require_string(arr[i], path + "." + name + "[" + std::to_string(i) + "]");
        try {
          out.push_back(g.vertex(id));
        } catch (const InputError&) {
          throw InputError(path + "." + name + "[" + std::to_string(i) + "]: unknown vertex \"" + id + "\"");
        }
      }
      return out;
    };
    std::vector<int> from = read_side("from");
    std::vector<int> to = read_side("to");
    int max_steps = static_cast<int>(g.vertex_count());
    if (c.contains("max_steps")) {
      if (!c["max_steps"].is_number_integer()) throw InputError(path + ".max_steps: expected an integer");
      max_steps = c["max_steps"].get<int>();
      if (max_steps < 1) throw InputError(path + ".max_steps: must be >= 1");
    }
    f = CurveFamily::connecting(std::move(from), std::move(to), max_steps);
    if (c.contains("simple")) {
      if (!c["simple"].is_boolean()) throw InputError(path + ".simple: expected a boolean");
      f.connector.simple = c["simple"].get<bool>();
    }
  }
  if (j.contains("required_edges")) {
    const Json& arr = require_array(j["required_edges"], origin + ".required_edges");
    std::vector<char> mask(g.edge_count(), 0);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string id = require_string(arr[i], origin + ".required_edges[" + std::to_string(i) + "]");
      mask[static_cast<std::size_t>(g.edge(id))] = 1;
    }
    f.required = std::move(mask);
  }
  return f;
}

inline std::string family_to_json(const MetricGraph& g, const CurveFamily& f) {
  detail::JsonWriter w;
  w.begin_object();
  if (f.kind == CurveFamily::Kind::Explicit) {
    w.key("explicit");
    w.begin_array();
    for (std::size_t i = 0; i < f.explicit_curves.size(); ++i) {
      if (i) w.comma();
      curve_to_json(w, g, f.explicit_curves[i]);
    }
    w.end_array();
  } else {
    w.key("connector");
    w.begin_object();
    auto side = [&](const char* name, const std::vector<int>& vs, bool lead_comma) {
      if (lead_comma) w.comma();
      w.key(name);
      w.begin_array();
      std::vector<std::string> ids;
      for (int v : vs) ids.push_back(g.vertex_ids[static_cast<std::size_t>(v)]);
      std::sort(ids.begin(), ids.end());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) w.comma();
        w.string(ids[i]);
      }
      w.end_array();
    };
    side("from", f.connector.from, false);
    w.comma();
    w.key("max_steps");
    w.integer(f.connector.max_steps);
    w.comma();
    w.key("simple");
    w.boolean(f.connector.simple);
    side("to", f.connector.to, true);
    w.end_object();
  }
  if (f.required) {
    w.comma();
    w.key("required_edges");
    w.begin_array();
    std::vector<std::string> ids;
    for (std::size_t e = 0; e < f.required->size(); ++e)
      if ((*f.required)[e]) ids.push_back(g.edges[e].id);
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) w.comma();
      w.string(ids[i]);
    }
    w.end_array();
  }
  w.end_object();
  std::string s = w.str();
  s += '\n';
  return s;
}

// ---- vertex functions ----

inline VertexFunction function_from_json(const MetricGraph& g, const Json& j, const std::string& origin = "f") {
  const Json& values = detail::require_member(j, "values", origin);
  if (!values.is_object()) throw InputError(origin + ".values: expected an object");
  VertexFunction f = VertexFunction::zero(g);
  std::vector<char> seen(g.vertex_count(), 0);
  for (auto it = values.begin(); it != values.end(); ++it) {
    const std::string path = origin + ".values[\"" + it.key() + "\"]";
    int v;
    try {
      v = g.vertex(it.key());
    } catch (const InputError&) {
      throw InputError(path + ": unknown vertex");
    }
    const double val = detail::require_number(it.value(), path);
    f.values[static_cast<std::size_t>(v)] = rat_of(val);
    f.values_d[static_cast<std::size_t>(v)] = val;
    seen[static_cast<std::size_t>(v)] = 1;
  }
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    if (!seen[v]) throw InputError(origin + ".values: missing vertex \"" + g.vertex_ids[v] + "\"");
  return f;
}

inline std::string function_to_json(const MetricGraph& g, const VertexFunction& f) {
  detail::JsonWriter w;
  w.begin_object();
  w.key("values");
  w.begin_object();
  std::vector<std::string> vids = g.vertex_ids;
  std::sort(vids.begin(), vids.end());
  for (std::size_t i = 0; i < vids.size(); ++i) {
    if (i) w.comma();
    w.key(vids[i]);
    w.number(f.at_d(g.vertex(vids[i])));
  }
  w.end_object();
  w.end_object();
  std::string s = w.str();
  s += '\n';
  return s;
}

// A pool of named functions, used by chart construction.
inline std::vector<std::pair<std::string, VertexFunction>> pool_from_json(const MetricGraph& g, const Json& j,
                                                                          const std::string& origin = "pool") {
  const Json& funcs = detail::require_member(j, "functions", origin);
  if (!funcs.is_object()) throw InputError(origin + ".functions: expected an object");
  std::vector<std::pair<std::string, VertexFunction>> out;
  for (auto it = funcs.begin(); it != funcs.end(); ++it) {
    Json wrapped;
    wrapped["values"] = it.value();
    out.emplace_back(it.key(),
                     function_from_json(g, wrapped, origin + ".functions[\"" + it.key() + "\"]"));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

inline MetricGraph load_space(const std::string& path) {
  return space_from_json(parse_json(read_text_file(path), path), path);
}

inline CurveFamily load_family(const std::string& path, const MetricGraph& g) {
  return family_from_json(g, parse_json(read_text_file(path), path), path);
}

inline VertexFunction load_function(const std::string& path, const MetricGraph& g) {
  return function_from_json(g, parse_json(read_text_file(path), path), path);
}

}  // namespace modgrad
