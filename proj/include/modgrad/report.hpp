#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "modgrad/bundle.hpp"
#include "modgrad/charts.hpp"
#include "modgrad/io.hpp"

namespace modgrad {

// ---- atlas serialization ----

inline std::string atlas_to_json(const MetricGraph& g, const Atlas& atlas) {
  detail::JsonWriter w;
  w.begin_object();
  w.key("charts");
  w.begin_array();
  for (std::size_t ci = 0; ci < atlas.charts.size(); ++ci) {
    const Chart& c = atlas.charts[ci];
    if (ci) w.comma();
    w.begin_object();
    w.key("components");
    w.begin_array();
    for (std::size_t k = 0; k < c.dim(); ++k) {
      if (k) w.comma();
      w.begin_object();
      w.key("name");
      w.string(c.phi.names[k]);
      w.comma();
      w.key("values");
      w.begin_object();
      bool first = true;
      for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        if (!first) w.comma();
        first = false;
        w.key(g.vertex_ids[v]);
        w.number(c.phi.components[k].at_d(static_cast<int>(v)));
      }
      w.end_object();
      w.end_object();
    }
    w.end_array();
    w.comma();
    w.key("dim");
    w.integer(static_cast<long long>(c.dim()));
    w.comma();
    w.key("directions");
    w.begin_object();
    {
      bool first_star = true;
      for (int v : c.stars) {
        const StarDirections& sd = c.cg.stars[static_cast<std::size_t>(v)];
        if (!first_star) w.comma();
        first_star = false;
        w.key(g.vertex_ids[static_cast<std::size_t>(v)]);
        w.begin_object();
        for (std::size_t e = 0; e < sd.edges.size(); ++e) {
          if (e) w.comma();
          w.key(g.edges[static_cast<std::size_t>(sd.edges[e])].id);
          w.begin_array();
          for (std::size_t k = 0; k < c.dim(); ++k) {
            if (k) w.comma();
            w.number(to_double(sd.w[e][k]));
          }
          w.end_array();
        }
        w.end_object();
      }
    }
    w.end_object();
    w.comma();
    w.key("independence");
    w.begin_object();
    {
      bool first_star = true;
      for (int v : c.stars) {
        if (!first_star) w.comma();
        first_star = false;
        w.key(g.vertex_ids[static_cast<std::size_t>(v)]);
        w.number(c.independence.count(v) ? c.independence.at(v) : 0.0);
      }
    }
    w.end_object();
    w.comma();
    w.key("stars");
    w.begin_array();
    for (std::size_t i = 0; i < c.stars.size(); ++i) {
      if (i) w.comma();
      w.string(g.vertex_ids[static_cast<std::size_t>(c.stars[i])]);
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.comma();
  w.key("uncovered");
  w.begin_array();
  for (std::size_t i = 0; i < atlas.uncovered.size(); ++i) {
    if (i) w.comma();
    w.string(g.vertex_ids[static_cast<std::size_t>(atlas.uncovered[i])]);
  }
  w.end_array();
  w.comma();
  w.key("warnings");
  w.begin_array();
  for (std::size_t i = 0; i < atlas.warnings.size(); ++i) {
    if (i) w.comma();
    w.string(atlas.warnings[i]);
  }
  w.end_array();
  w.comma();
  w.key("zero_dim_stars");
  w.begin_array();
  for (std::size_t i = 0; i < atlas.zero_dim_stars.size(); ++i) {
    if (i) w.comma();
    w.string(g.vertex_ids[static_cast<std::size_t>(atlas.zero_dim_stars[i])]);
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

// Reload: charts are rebuilt from the stored component values; directions and
// independence are recomputed rather than trusted.
inline Atlas atlas_from_json(const MetricGraph& g, const Json& j, const std::string& origin) {
  Atlas atlas;
  const Json& charts = detail::require_array(detail::require_member(j, "charts", origin), origin + ".charts");
  for (std::size_t ci = 0; ci < charts.size(); ++ci) {
    const std::string path = origin + ".charts[" + std::to_string(ci) + "]";
    Chart c;
    const Json& comps = detail::require_array(detail::require_member(charts[ci], "components", path), path + ".components");
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const std::string cpath = path + ".components[" + std::to_string(k) + "]";
      c.phi.names.push_back(detail::require_string(detail::require_member(comps[k], "name", cpath), cpath + ".name"));
      c.phi.components.push_back(function_from_json(g, comps[k], cpath));
    }
    const Json& stars = detail::require_array(detail::require_member(charts[ci], "stars", path), path + ".stars");
    for (const auto& s : stars) c.stars.push_back(g.vertex(detail::require_string(s, path + ".stars[]")));
    c.cg = canonical_gradient(g, c.phi);
    const IndependenceIndex ii = independence_index(g, c.cg);
    for (int v : c.stars) c.independence[v] = ii.value[static_cast<std::size_t>(v)];
    atlas.charts.push_back(std::move(c));
  }
  if (j.contains("zero_dim_stars"))
    for (const auto& s : detail::require_array(j["zero_dim_stars"], origin + ".zero_dim_stars"))
      atlas.zero_dim_stars.push_back(g.vertex(detail::require_string(s, origin + ".zero_dim_stars[]")));
  if (j.contains("uncovered"))
    for (const auto& s : detail::require_array(j["uncovered"], origin + ".uncovered"))
      atlas.uncovered.push_back(g.vertex(detail::require_string(s, origin + ".uncovered[]")));
  return atlas;
}

inline Atlas load_atlas(const MetricGraph& g, const std::string& path) {
  return atlas_from_json(g, parse_json(read_text_file(path), path), path);
}

// ---- run reports ----

struct ReportRow {
  std::string suite, instance, location, quantity, expected, actual, tolerance, verdict;
};

struct RunReport {
  std::vector<ReportRow> rows;

  void add(ReportRow row) { rows.push_back(std::move(row)); }

  void check(const std::string& suite, const std::string& instance, const std::string& location,
             const std::string& quantity, const std::string& expected, const std::string& actual,
             const std::string& tolerance, bool ok) {
    rows.push_back({suite, instance, location, quantity, expected, actual, tolerance, ok ? "pass" : "fail"});
  }

  void info(const std::string& suite, const std::string& instance, const std::string& location,
            const std::string& quantity, const std::string& actual) {
    rows.push_back({suite, instance, location, quantity, "", actual, "", "info"});
  }

  bool all_pass() const {
    for (const ReportRow& r : rows)
      if (r.verdict == "fail") return false;
    return true;
  }

  std::size_t failures() const {
    std::size_t n = 0;
    for (const ReportRow& r : rows) n += r.verdict == "fail";
    return n;
  }
};

inline std::string report_to_json(const RunReport& rep, const std::string& config_echo) {
  detail::JsonWriter w;
  w.begin_object();
  w.key("all_pass");
  w.boolean(rep.all_pass());
  w.comma();
  w.key("config");
  w.string(config_echo);
  w.comma();
  w.key("rows");
  w.begin_array();
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const ReportRow& r = rep.rows[i];
    if (i) w.comma();
    w.begin_object();
    w.key("actual");
    w.string(r.actual);
    w.comma();
    w.key("expected");
    w.string(r.expected);
    w.comma();
    w.key("instance");
    w.string(r.instance);
    w.comma();
    w.key("location");
    w.string(r.location);
    w.comma();
    w.key("quantity");
    w.string(r.quantity);
    w.comma();
    w.key("suite");
    w.string(r.suite);
    w.comma();
    w.key("tolerance");
    w.string(r.tolerance);
    w.comma();
    w.key("verdict");
    w.string(r.verdict);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

inline std::string report_to_csv(const RunReport& rep) {
  std::string out = "suite,instance,location,quantity,expected,actual,tolerance,verdict\n";
  for (const ReportRow& r : rep.rows) {
    out += detail::csv_field(r.suite) + "," + detail::csv_field(r.instance) + "," + detail::csv_field(r.location) +
           "," + detail::csv_field(r.quantity) + "," + detail::csv_field(r.expected) + "," +
           detail::csv_field(r.actual) + "," + detail::csv_field(r.tolerance) + "," + detail::csv_field(r.verdict) +
           "\n";
  }
  return out;
}

// ---- static SVG plots ----

namespace detail {

struct SvgFrame {
  double min_x = 0, min_y = 0, scale = 1;
  double width = 640, height = 640;

  double px(double x) const { return 40 + (x - min_x) * scale; }
  double py(double y) const { return height - 40 - (y - min_y) * scale; }
};

inline SvgFrame svg_frame(const MetricGraph& g) {
  SvgFrame f;
  if (g.coords.empty()) return f;
  double max_x = -1e300, max_y = -1e300;
  f.min_x = 1e300;
  f.min_y = 1e300;
  for (const auto& [id, xy] : g.coords) {
    f.min_x = std::min(f.min_x, xy[0]);
    f.min_y = std::min(f.min_y, xy[1]);
    max_x = std::max(max_x, xy[0]);
    max_y = std::max(max_y, xy[1]);
  }
  const double span = std::max({max_x - f.min_x, max_y - f.min_y, 1e-9});
  f.scale = (f.width - 80) / span;
  return f;
}

inline std::string svg_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(40 + 215 * t));
  const int b = static_cast<int>(std::lround(255 - 215 * t));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x40%02x", r, b);
  return buf;
}

}  // namespace detail

// Edge density heatmap: blue (0) to red (max).
inline std::string svg_rho_heatmap(const MetricGraph& g, const std::vector<double>& rho,
                                   const std::string& title) {
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\">\n";
  out += "<text x=\"20\" y=\"24\" font-family=\"monospace\" font-size=\"14\">" + title + "</text>\n";
  if (g.coords.empty()) {
    out += "<text x=\"20\" y=\"48\" font-family=\"monospace\" font-size=\"12\">no coordinates available</text>\n</svg>\n";
    return out;
  }
  const detail::SvgFrame f = detail::svg_frame(g);
  double max_rho = 0;
  for (double r : rho) max_rho = std::max(max_rho, r);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto& a = g.coords.at(g.vertex_ids[static_cast<std::size_t>(g.edges[e].u)]);
    const auto& b = g.coords.at(g.vertex_ids[static_cast<std::size_t>(g.edges[e].v)]);
    const double t = max_rho > 0 ? rho[e] / max_rho : 0;
    out += "<line x1=\"" + canonical_double(f.px(a[0])) + "\" y1=\"" + canonical_double(f.py(a[1])) + "\" x2=\"" +
           canonical_double(f.px(b[0])) + "\" y2=\"" + canonical_double(f.py(b[1])) + "\" stroke=\"" +
           detail::svg_color(t) + "\" stroke-width=\"4\"><title>" + g.edges[e].id + " rho=" +
           canonical_double(rho[e]) + "</title></line>\n";
  }
  out += "<text x=\"20\" y=\"620\" font-family=\"monospace\" font-size=\"12\">max rho = " +
         canonical_double(max_rho) + "</text>\n</svg>\n";
  return out;
}

// Chart dimension map: one circle per star, labeled by chart dimension.
inline std::string svg_dimension_map(const MetricGraph& g, const Atlas& atlas, const std::string& title) {
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\">\n";
  out += "<text x=\"20\" y=\"24\" font-family=\"monospace\" font-size=\"14\">" + title + "</text>\n";
  if (g.coords.empty()) {
    out += "<text x=\"20\" y=\"48\" font-family=\"monospace\" font-size=\"12\">no coordinates available</text>\n</svg>\n";
    return out;
  }
  const detail::SvgFrame f = detail::svg_frame(g);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto& a = g.coords.at(g.vertex_ids[static_cast<std::size_t>(g.edges[e].u)]);
    const auto& b = g.coords.at(g.vertex_ids[static_cast<std::size_t>(g.edges[e].v)]);
    out += "<line x1=\"" + canonical_double(f.px(a[0])) + "\" y1=\"" + canonical_double(f.py(a[1])) + "\" x2=\"" +
           canonical_double(f.px(b[0])) + "\" y2=\"" + canonical_double(f.py(b[1])) +
           "\" stroke=\"#cccccc\" stroke-width=\"2\"/>\n";
  }
  std::vector<int> dim_of(g.vertex_count(), -1);
  for (const Chart& c : atlas.charts)
    for (int v : c.stars) dim_of[static_cast<std::size_t>(v)] = static_cast<int>(c.dim());
  for (int v : atlas.zero_dim_stars) dim_of[static_cast<std::size_t>(v)] = 0;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const auto& xy = g.coords.at(g.vertex_ids[v]);
    const double t = dim_of[v] <= 0 ? 0.0 : dim_of[v] / 2.0;
    out += "<circle cx=\"" + canonical_double(f.px(xy[0])) + "\" cy=\"" + canonical_double(f.py(xy[1])) +
           "\" r=\"8\" fill=\"" + detail::svg_color(t) + "\"><title>" + g.vertex_ids[v] + " dim=" +
           std::to_string(dim_of[v]) + "</title></circle>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace modgrad
