#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modgrad/generators.hpp"
#include "modgrad/gradient.hpp"
#include "modgrad/report.hpp"

namespace modgrad {

struct GeneratorSpec {
  std::string kind;  // grid | rug | parallel | carpet
  int nx = 3, ny = 3, k = 2, m = 2, level = 1;
  double h = 1.0;
};

struct ExperimentConfig {
  std::optional<GeneratorSpec> generator;
  std::optional<std::string> space_file;
  std::vector<double> exponents;
  std::vector<std::pair<std::string, Json>> functions;  // resolved once the space exists
  std::vector<std::string> suites;
  bool exact = false;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> outputs;  // json | csv | svg -> path
  std::string echo;                            // original config text, for the report
};

inline GeneratorSpec generator_from_json(const Json& j, const std::string& origin) {
  GeneratorSpec spec;
  spec.kind = detail::require_string(detail::require_member(j, "kind", origin), origin + ".kind");
  auto get_int = [&](const char* name, int fallback) {
    return j.contains(name) ? static_cast<int>(detail::require_number(j[name], origin + "." + name)) : fallback;
  };
  spec.nx = get_int("nx", spec.nx);
  spec.ny = get_int("ny", spec.ny);
  spec.k = get_int("k", spec.k);
  spec.m = get_int("m", spec.m);
  spec.level = get_int("level", spec.level);
  if (j.contains("h")) spec.h = detail::require_number(j["h"], origin + ".h");
  return spec;
}

inline MetricGraph make_generated_space(const GeneratorSpec& spec) {
  if (spec.kind == "grid") return make_grid(spec.nx, spec.ny, spec.h);
  if (spec.kind == "rug") return make_rug(spec.nx, spec.ny, spec.h);
  if (spec.kind == "parallel") return make_parallel_paths(spec.k, spec.m);
  if (spec.kind == "carpet") return make_carpet(spec.level);
  throw InputError("unknown generator kind '" + spec.kind + "'");
}

inline ExperimentConfig config_from_json(const std::string& text, const std::string& origin) {
  const Json j = parse_json(text, origin);
  ExperimentConfig cfg;
  cfg.echo = text;
  const Json& space = detail::require_member(j, "space", origin);
  if (space.contains("generator"))
    cfg.generator = generator_from_json(space["generator"], origin + ".space.generator");
  else if (space.contains("file"))
    cfg.space_file = detail::require_string(space["file"], origin + ".space.file");
  else
    throw InputError(origin + ".space: needs either \"generator\" or \"file\"");
  if (j.contains("exponents"))
    for (const auto& p : detail::require_array(j["exponents"], origin + ".exponents")) {
      const double v = detail::require_number(p, origin + ".exponents[]");
      if (!(v >= 1)) throw InputError(origin + ".exponents: values must be >= 1");
      cfg.exponents.push_back(v);
    }
  if (cfg.exponents.empty()) cfg.exponents.push_back(2.0);
  if (j.contains("functions"))
    for (const auto& f : detail::require_array(j["functions"], origin + ".functions")) {
      const std::string name =
          detail::require_string(detail::require_member(f, "name", origin + ".functions[]"), origin + ".functions[].name");
      cfg.functions.emplace_back(name, f);
    }
  if (j.contains("suites"))
    for (const auto& s : detail::require_array(j["suites"], origin + ".suites"))
      cfg.suites.push_back(detail::require_string(s, origin + ".suites[]"));
  else
    cfg.suites = {"modulus", "plans", "gradient", "charts", "bundle"};
  if (j.contains("exact")) {
    if (!j["exact"].is_boolean()) throw InputError(origin + ".exact: expected a boolean");
    cfg.exact = j["exact"].get<bool>();
  }
  if (j.contains("seed")) cfg.seed = static_cast<std::uint64_t>(detail::require_number(j["seed"], origin + ".seed"));
  if (j.contains("output")) {
    const Json& out = j["output"];
    if (!out.is_object()) throw InputError(origin + ".output: expected an object");
    for (const auto& [key, val] : out.items()) {
      if (key != "json" && key != "csv" && key != "svg")
        throw InputError(origin + ".output: unknown format \"" + key + "\" (json, csv, svg)");
      cfg.outputs[key] = detail::require_string(val, origin + ".output." + key);
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(read_text_file(path), path); }

// Polynomial terms or explicit values, per the config schema.
inline VertexFunction resolve_function(const MetricGraph& g, const Json& j, const std::string& origin) {
  if (j.contains("poly")) {
    std::vector<PolyTerm> terms;
    for (const auto& t : detail::require_array(j["poly"], origin + ".poly")) {
      PolyTerm term;
      term.coef = detail::require_number(detail::require_member(t, "coef", origin + ".poly[]"), origin + ".poly[].coef");
      if (t.contains("px")) term.px = static_cast<int>(detail::require_number(t["px"], origin + ".poly[].px"));
      if (t.contains("py")) term.py = static_cast<int>(detail::require_number(t["py"], origin + ".poly[].py"));
      terms.push_back(term);
    }
    return polynomial_function(g, terms);
  }
  if (j.contains("values")) return function_from_json(g, j, origin);
  throw InputError(origin + ": function needs either \"poly\" or \"values\"");
}

namespace detail {

inline std::string fmt(double x) { return canonical_double(x); }

inline std::string fmt_rational(const Rational& r) { return canonical_double(to_double(r)); }

inline int stage_of(const std::string& suite) {
  if (suite == "modulus") return 0;
  if (suite == "plans") return 1;
  if (suite == "gradient" || suite == "thm11") return 2;
  if (suite == "charts" || suite == "atlas") return 3;
  if (suite == "bundle") return 4;
  throw InputError("unknown suite '" + suite + "'");
}

}  // namespace detail

struct RunArtifacts {
  RunReport report;
  std::vector<double> rho;  // first modulus density, for the heatmap
  std::optional<Atlas> atlas;
};

// Executes the requested suites in dependency order and collects report rows.
inline RunArtifacts run_suites(const MetricGraph& g, const ExperimentConfig& cfg) {
  RunArtifacts art;
  RunReport& rep = art.report;

  std::vector<std::string> suites = cfg.suites;
  std::stable_sort(suites.begin(), suites.end(),
                   [](const std::string& a, const std::string& b) { return detail::stage_of(a) < detail::stage_of(b); });

  std::vector<std::pair<std::string, VertexFunction>> funcs;
  for (const auto& [name, js] : cfg.functions) funcs.emplace_back(name, resolve_function(g, js, "config.functions." + name));
  if (funcs.empty() && !g.coords.empty()) {
    funcs.emplace_back("x", coordinate_function(g, 0));
    funcs.emplace_back("y", coordinate_function(g, 1));
  }

  ModulusOptions mod_opt;
  mod_opt.exact = cfg.exact;

  std::map<double, ModulusResult> mod_results;
  const bool has_coords = !g.coords.empty();

  for (const std::string& suite : suites) {
    if (suite == "modulus") {
      if (!has_coords) {
        rep.info(suite, "-", "-", "skipped", "space has no coordinates; no canonical crossing family");
        continue;
      }
      const CurveFamily family = crossing_family(g, 0);
      for (double p : cfg.exponents) {
        const ModulusResult res = mod_p(g, family, p, mod_opt);
        mod_results.emplace(p, res);
        const std::string inst = "crossing p=" + detail::fmt(p);
        rep.info(suite, inst, "-", "mod_p", detail::fmt(res.value));
        rep.info(suite, inst, "-", "constraints", std::to_string(res.constraints_generated));
        if (res.is_zero) {
          rep.check(suite, inst, "-", "zero modulus certificate", "certified", res.attained ? "attained" : "unattained",
                    "-", true);
          continue;
        }
        if (p > 1)
          rep.check(suite, inst, "-", "relative duality gap", "<= 1e-6", detail::fmt(res.duality_gap_rel), "1e-6",
                    res.duality_gap_rel <= 1e-6);
        rep.check(suite, inst, "-", "KKT residual", "<= 1e-6", detail::fmt(res.kkt_residual), "1e-6",
                  res.kkt_residual <= 1e-6);
        if (cfg.exact)
          rep.check(suite, inst, "-", "exact certificate", "feasible and stationary",
                    res.exact_feasible && res.exact_kkt ? "certified" : "missing", "-",
                    res.exact_feasible && res.exact_kkt);
        if (art.rho.empty()) art.rho = res.rho;
      }
    } else if (suite == "plans") {
      if (mod_results.empty()) {
        if (!has_coords) {
          rep.info(suite, "-", "-", "skipped", "no modulus result to derive a plan from");
          continue;
        }
        const CurveFamily family = crossing_family(g, 0);
        for (double p : cfg.exponents) mod_results.emplace(p, mod_p(g, family, p, mod_opt));
      }
      for (const auto& [p, res] : mod_results) {
        const std::string inst = "dual plan p=" + detail::fmt(p);
        if (res.is_zero || res.active.empty()) {
          rep.info(suite, inst, "-", "skipped", "zero modulus: no dual plan");
          continue;
        }
        const DualPlan dp = dual_plan(g, res);
        rep.info(suite, inst, "-", "plan mass", detail::fmt(dp.plan.mass()));
        rep.info(suite, inst, "-", "density q-norm", detail::fmt(dp.density_norm_q));
        rep.check(suite, inst, "-", "density-rho link residual", "<= 1e-9", detail::fmt(dp.kkt_link_residual), "1e-9",
                  dp.kkt_link_residual <= 1e-9);
        const Plan sym = symmetrize_plan(dp.plan);
        const Disintegration dis = disintegrate(g, sym, LocationKind::EdgePoint);
        const double fub = disintegration_fubini_residual(g, sym, dis);
        rep.check(suite, inst, "-", "disintegration consistency", "<= 1e-12", detail::fmt(fub), "1e-12", fub <= 1e-12);
      }
    } else if (suite == "gradient" || suite == "thm11") {
      for (const auto& [name, f] : funcs) {
        const WeakGradient gf = minimal_weak_gradient(g, f, LocationKind::EdgePoint);
        double sup = 0;
        for (double v : gf.g) sup = std::max(sup, v);
        rep.info(suite, name, "-", "gradient sup", detail::fmt(sup));
        if (suite == "thm11") {
          for (double p : cfg.exponents) {
            if (!(p > 1)) continue;
            const RepresentingPlan rp = representing_plan(g, f, p, mod_opt);
            const std::string inst = name + " p=" + detail::fmt(p);
            rep.check(suite, inst, "-", "mu dominated by plan barycenter on D", "holds",
                      rp.mu_abscont_on_support ? "holds" : "violated", "-", rp.mu_abscont_on_support);
            for (int e : rp.support) {
              const bool ok =
                  std::find(rp.identity_failures.begin(), rp.identity_failures.end(), e) == rp.identity_failures.end();
              rep.check(suite, inst, location_id(g, edge_point(e)), "esssup ratio identity", "equal",
                        ok ? "equal" : "differs", "exact", ok);
            }
          }
        } else {
          ViolationOptions vo;
          vo.max_steps = std::min<int>(8, static_cast<int>(g.vertex_count()));
          vo.budget = 20000;
          vo.modulus = mod_opt;
          const ViolationSearch vs = violating_plan(g, f, gf, cfg.exponents.front(), vo);
          const bool ok = vs.outcome != ViolationSearch::Outcome::Found;
          rep.check(suite, name, "-", "upper gradient along enumerated curves", "no violating curve",
                    vs.outcome == ViolationSearch::Outcome::Found
                        ? "violation found"
                        : (vs.outcome == ViolationSearch::Outcome::NoneExhaustive ? "none (exhaustive)"
                                                                                  : "none (budget reached)"),
                    "-", ok);
        }
      }
    } else if (suite == "charts" || suite == "atlas") {
      std::vector<std::pair<std::string, VertexFunction>> pool;
      if (has_coords) {
        pool.emplace_back("x", coordinate_function(g, 0));
        pool.emplace_back("y", coordinate_function(g, 1));
      }
      for (const auto& [name, f] : funcs)
        if (std::find_if(pool.begin(), pool.end(), [&](const auto& q) { return q.first == name; }) == pool.end())
          pool.emplace_back(name, f);
      if (pool.empty()) {
        rep.info(suite, "-", "-", "skipped", "no chart candidates available");
        continue;
      }
      const Atlas atlas = build_atlas(g, pool);
      art.atlas = atlas;
      std::string dims = "[";
      for (std::size_t i = 0; i < atlas.charts.size(); ++i)
        dims += (i ? ", " : "") + std::to_string(atlas.charts[i].dim());
      if (!atlas.zero_dim_stars.empty()) dims += std::string(atlas.charts.empty() ? "" : ", ") + "0";
      dims += "]";
      rep.info(suite, "-", "-", "chart dimensions", dims);
      for (const std::string& wmsg : atlas.warnings) rep.info(suite, "-", "-", "warning", wmsg);
      rep.check(suite, "-", "-", "all non-exceptional stars charted", "yes", atlas.uncovered.empty() ? "yes" : "no",
                "-", atlas.uncovered.empty());
      if (!atlas.zero_dim_stars.empty()) {
        std::vector<Location> U;
        for (int v : atlas.zero_dim_stars) U.push_back(vertex_star(v));
        bool zero_ok = true;
        try {
          zero_ok = zero_chart_check(g, U);
        } catch (const CheckError&) {
          zero_ok = false;
        }
        rep.check(suite, "-", "-", "zero chart equals zero modulus", "agree", zero_ok ? "agree" : "disagree", "-",
                  zero_ok);
      }
      if (suite == "charts")
        for (const Chart& c : atlas.charts)
          for (int v : c.stars)
            rep.info(suite, "chart dim " + std::to_string(c.dim()), "star:" + g.vertex_ids[static_cast<std::size_t>(v)],
                     "independence", detail::fmt(c.independence.at(v)));
    } else if (suite == "bundle") {
      std::vector<std::pair<std::string, VertexFunction>> pool;
      if (has_coords) {
        pool.emplace_back("x", coordinate_function(g, 0));
        pool.emplace_back("y", coordinate_function(g, 1));
      }
      for (const auto& [name, f] : funcs)
        if (std::find_if(pool.begin(), pool.end(), [&](const auto& q) { return q.first == name; }) == pool.end())
          pool.emplace_back(name, f);
      if (pool.empty()) {
        rep.info(suite, "-", "-", "skipped", "no chart candidates available");
        continue;
      }
      const Atlas atlas = build_atlas(g, pool);
      if (atlas.charts.empty()) {
        rep.info(suite, "-", "-", "skipped", "atlas has no positive-dimension charts");
        continue;
      }
      const Chart& base = atlas.charts.front();
      const std::size_t n = base.dim();
      // Three linear reparametrizations of the leading chart.
      auto reparam = [&](const std::vector<std::vector<Rational>>& A, const std::string& tag) {
        Chart c;
        c.stars = base.stars;
        for (std::size_t r = 0; r < n; ++r) {
          VertexFunction comp = VertexFunction::zero(g);
          for (std::size_t k = 0; k < n; ++k) comp = comp + A[r][k] * base.phi.components[k];
          c.phi.names.push_back(tag + std::to_string(r));
          c.phi.components.push_back(std::move(comp));
        }
        c.cg = canonical_gradient(g, c.phi);
        return c;
      };
      std::vector<std::vector<Rational>> A1(n, std::vector<Rational>(n, Rational(0))),
          A2 = A1, A3 = A1;
      for (std::size_t i = 0; i < n; ++i) {
        A1[i][i] = Rational(1);
        A2[i][i] = Rational(i + 2);
        A3[i][i] = Rational(1);
      }
      if (n >= 2) {
        A2[0][1] = Rational(1);
        A3[0][1] = Rational(1);
        A3[1][0] = Rational(1, 2);
      }
      const std::vector<Chart> charts = {reparam(A1, "a"), reparam(A2, "b"), reparam(A3, "c")};
      const TransitionReport tr = transitions(g, charts);
      rep.check(suite, "-", "-", "cocycle identity", "<= 1e-12", detail::fmt(tr.cocycle_gap), "1e-12",
                tr.cocycle_gap <= 1e-12);
      rep.check(suite, "-", "-", "transition isometry", "exact", tr.all_exact ? "exact" : "approximate", "-",
                tr.all_exact);
      for (const auto& [name, f] : funcs) {
        const DifferentialSection ds = differential_section(g, charts, f, &tr);
        rep.check(suite, name, "-", "section compatibility", "compatible",
                  ds.compat.compatible ? "compatible" : "incompatible", "-", ds.compat.compatible);
        for (double p : cfg.exponents) {
          const double a = section_norm(g, charts, ds.section, p);
          const double b = gradient_lp_norm(g, charts, f, p);
          const double gap = std::abs(a - b);
          if (ds.all_exact)
            rep.check(suite, name + " p=" + detail::fmt(p), "-", "section norm equals gradient norm", "<= 1e-12",
                      detail::fmt(gap), "1e-12", gap <= 1e-12);
          else
            rep.info(suite, name + " p=" + detail::fmt(p), "-", "section norm vs gradient norm (residuals present)",
                     detail::fmt(gap));
        }
      }
      std::vector<VertexFunction> probes;
      for (const auto& [name, f] : funcs) probes.push_back(f);
      const BundleComparison c12 = pq_map(g, {base}, 1.5, 2.0, probes);
      const BundleComparison c23 = pq_map(g, {base}, 2.0, 3.0, probes);
      const BundleComparison c13 = pq_map(g, {base}, 1.5, 3.0, probes);
      rep.check(suite, "pq (1.5, 2, 3)", "-", "1-Lipschitz", "holds",
                c12.lipschitz_ok && c23.lipschitz_ok && c13.lipschitz_ok ? "holds" : "violated", "-",
                c12.lipschitz_ok && c23.lipschitz_ok && c13.lipschitz_ok);
      rep.check(suite, "pq (1.5, 2, 3)", "-", "surjective", "holds",
                c12.surjective_ok && c23.surjective_ok && c13.surjective_ok ? "holds" : "violated", "-",
                c12.surjective_ok && c23.surjective_ok && c13.surjective_ok);
      rep.check(suite, "pq (1.5, 2, 3)", "-", "composition law", "exact", pq_composes(c13, c12, c23) ? "exact" : "broken",
                "-", pq_composes(c13, c12, c23));
      for (const auto& [name, f] : funcs) {
        const CheegerReport cr = cheeger_compare(g, {base}, f);
        rep.info(suite, name, "-", "Lip equals weak norm at stars",
                 std::to_string(cr.equal_stars) + "/" + std::to_string(cr.equal_stars + cr.gap_stars));
        rep.check(suite, name, "-", "submetry unit-ball cover", "holds", cr.all_submetry_ok ? "holds" : "violated",
                  "-", cr.all_submetry_ok);
      }
    }
  }
  return art;
}

// Full run: build the space, execute the suites, write the requested outputs.
inline RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  MetricGraph g = cfg.generator ? make_generated_space(*cfg.generator)
                                : space_from_json(parse_json(read_text_file(*cfg.space_file), *cfg.space_file),
                                                  *cfg.space_file);
  RunArtifacts art = run_suites(g, cfg);
  if (cfg.outputs.count("json")) write_text_file(cfg.outputs.at("json"), report_to_json(art.report, cfg.echo));
  if (cfg.outputs.count("csv")) write_text_file(cfg.outputs.at("csv"), report_to_csv(art.report));
  if (cfg.outputs.count("svg")) {
    std::string svg;
    if (!art.rho.empty())
      svg = svg_rho_heatmap(g, art.rho, "optimal density");
    else if (art.atlas)
      svg = svg_dimension_map(g, *art.atlas, "chart dimensions");
    else
      svg = svg_rho_heatmap(g, std::vector<double>(g.edge_count(), 0.0), "no density computed");
    write_text_file(cfg.outputs.at("svg"), svg);
  }
  return art;
}

}  // namespace modgrad
