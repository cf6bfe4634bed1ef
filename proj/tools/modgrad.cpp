#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modgrad/modgrad.hpp"

using namespace modgrad;

namespace {

std::string rat_str(const Rational& r) {
  std::ostringstream ss;
  ss << r;
  return ss.str();
}

std::string modulus_report_json(const MetricGraph& g, const ModulusResult& res) {
  detail::JsonWriter w;
  w.begin_object();
  w.key("active_curves");
  w.begin_array();
  for (std::size_t i = 0; i < res.active.size(); ++i) {
    if (i) w.comma();
    w.begin_object();
    w.key("curve");
    w.string(curve_to_string(g, res.active[i].curve));
    w.comma();
    w.key("lambda");
    w.number(res.active[i].lambda);
    w.end_object();
  }
  w.end_array();
  w.comma();
  w.key("attained");
  w.boolean(res.attained);
  w.comma();
  w.key("constraints_generated");
  w.integer(static_cast<long long>(res.constraints_generated));
  w.comma();
  w.key("duality_gap_rel");
  w.number(res.duality_gap_rel);
  w.comma();
  w.key("exact_mode");
  w.boolean(res.exact_mode);
  if (res.value_exact_valid) {
    w.comma();
    w.key("exact_value");
    w.string(rat_str(res.value_exact));
  }
  w.comma();
  w.key("is_zero");
  w.boolean(res.is_zero);
  w.comma();
  w.key("kkt_residual");
  w.number(res.kkt_residual);
  w.comma();
  w.key("notes");
  w.string(res.notes);
  w.comma();
  w.key("p");
  w.number(res.p);
  w.comma();
  w.key("rho");
  w.begin_object();
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    if (e) w.comma();
    w.key(g.edges[e].id);
    w.number(res.rho[e]);
  }
  w.end_object();
  w.comma();
  w.key("value");
  w.number(res.value);
  w.end_object();
  return w.str() + "\n";
}

int gen_main(const std::string& kind, int nx, int ny, double h, int k, int m, int level, const std::string& out) {
  MetricGraph g;
  if (kind == "grid")
    g = make_grid(nx, ny, h);
  else if (kind == "rug")
    g = make_rug(nx, ny, h);
  else if (kind == "parallel")
    g = make_parallel_paths(k, m);
  else if (kind == "carpet")
    g = make_carpet(level);
  else
    throw InputError("unknown generator '" + kind + "'");
  const std::string text = space_to_json(g);
  if (out.empty())
    std::fputs(text.c_str(), stdout);
  else
    write_text_file(out, text);
  std::fprintf(stderr, "%s: %zu vertices, %zu edges\n", kind.c_str(), g.vertex_count(), g.edge_count());
  return 0;
}

std::vector<std::pair<std::string, VertexFunction>> chart_pool(const MetricGraph& g, const std::string& pool_path) {
  if (!pool_path.empty()) {
    const Json j = parse_json(read_text_file(pool_path), pool_path);
    return pool_from_json(g, j, pool_path);
  }
  if (g.coords.empty()) throw InputError("no pool file and the space has no coordinates to derive one from");
  return {{"x", coordinate_function(g, 0)}, {"y", coordinate_function(g, 1)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minimal weak upper gradients, charts and cotangent bundles on metric graphs"};
  app.require_subcommand(1);
  // --h is a real option below, so help is long-form only.
  const auto fix_help = [](CLI::App* a) { a->set_help_flag("--help", "print help and exit"); };
  fix_help(&app);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a space file");
  fix_help(gen);
  gen->require_subcommand(1);
  struct GenArgs {
    int nx = 3, ny = 3, k = 2, m = 2, level = 1;
    double h = 1.0;
    std::string out;
  } ga;
  for (const char* kind : {"grid", "rug", "parallel", "carpet"}) {
    auto* sub = gen->add_subcommand(kind);
    fix_help(sub);
    if (std::string(kind) == "grid" || std::string(kind) == "rug") {
      sub->add_option("--nx", ga.nx, "vertices along x");
      sub->add_option("--ny", ga.ny, "vertices along y");
      sub->add_option("--h", ga.h, "edge length");
    } else if (std::string(kind) == "parallel") {
      sub->add_option("--k", ga.k, "number of disjoint paths");
      sub->add_option("--m", ga.m, "edges per path");
    } else {
      sub->add_option("--level", ga.level, "subdivision level (1..6)");
    }
    sub->add_option("-o,--out", ga.out, "output file (stdout when omitted)");
  }

  // modulus
  auto* mod = app.add_subcommand("modulus", "p-modulus of a curve family");
  fix_help(mod);
  std::string mod_space, mod_family, mod_report;
  double mod_p_val = 2.0;
  bool mod_exact = false;
  mod->add_option("--space", mod_space, "space file")->required();
  mod->add_option("--family", mod_family, "curve family file")->required();
  mod->add_option("--p", mod_p_val, "exponent (>= 1)");
  mod->add_flag("--exact", mod_exact, "certify the optimum in rational arithmetic");
  mod->add_option("--report", mod_report, "write a JSON report");

  // gradient
  auto* grad = app.add_subcommand("gradient", "minimal weak upper gradient of a vertex function");
  fix_help(grad);
  std::string grad_space, grad_f;
  double grad_p = 2.0, grad_eps = 0.0;
  bool grad_exact = false, grad_thm = false;
  grad->add_option("--space", grad_space, "space file")->required();
  grad->add_option("--f", grad_f, "function file")->required();
  grad->add_option("--p", grad_p, "exponent (> 1 for plan verification)");
  grad->add_flag("--exact", grad_exact, "exact-mode modulus subproblems");
  grad->add_flag("--verify-thm11", grad_thm, "verify the curvewise characterization through a representing plan");
  grad->add_option("--eps", grad_eps, "also compute the eps-productive set (0 < eps < 1)");

  // chart (+ chart diff)
  auto* chart = app.add_subcommand("chart", "build an atlas of independence charts");
  fix_help(chart);
  std::string chart_space, chart_pool_path, chart_atlas;
  double chart_p = 2.0;
  chart->add_option("--space", chart_space, "space file");
  chart->add_option("--pool", chart_pool_path, "candidate pool file");
  chart->add_option("--p", chart_p, "exponent (recorded; the discrete structure is exponent-independent)");
  chart->add_option("--atlas", chart_atlas, "output atlas file");
  auto* diff = chart->add_subcommand("diff", "differential of a function over a stored atlas");
  fix_help(diff);
  std::string diff_space, diff_chart, diff_f, diff_out;
  diff->add_option("--space", diff_space, "space file")->required();
  diff->add_option("--chart", diff_chart, "atlas file")->required();
  diff->add_option("--f", diff_f, "function file")->required();
  diff->add_option("-o,--out", diff_out, "output file (stdout when omitted)");

  // bundle
  auto* bun = app.add_subcommand("bundle", "cotangent bundle checks over a stored atlas");
  fix_help(bun);
  std::string bun_space, bun_atlas, bun_check, bun_f, bun_report;
  bun->add_option("--space", bun_space, "space file")->required();
  bun->add_option("--atlas", bun_atlas, "atlas file")->required();
  bun->add_option("--check", bun_check, "cocycle | norms | pq | cheeger")->required();
  bun->add_option("--f", bun_f, "function file for norms/cheeger (default: coordinates)");
  bun->add_option("--report", bun_report, "write a JSON report");

  // run
  auto* run = app.add_subcommand("run", "run configured suites and write reports");
  fix_help(run);
  std::string run_config;
  run->add_option("--config", run_config, "experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      for (const char* kind : {"grid", "rug", "parallel", "carpet"})
        if (gen->get_subcommand(kind)->parsed())
          return gen_main(kind, ga.nx, ga.ny, ga.h, ga.k, ga.m, ga.level, ga.out);
      return 2;
    }

    if (mod->parsed()) {
      const MetricGraph g = load_space(mod_space);
      const CurveFamily family = load_family(mod_family, g);
      ModulusOptions opt;
      opt.exact = mod_exact;
      const ModulusResult res = mod_p(g, family, mod_p_val, opt);
      std::printf("mod_%g = %.12g%s\n", res.p, res.value,
                  res.value_exact_valid ? (" (exact " + rat_str(res.value_exact) + ")").c_str() : "");
      if (res.is_zero)
        std::printf("zero modulus: %s\n", res.attained ? "attained by a null density" : "unattained (witness recorded)");
      else
        std::printf("gap %.3g, kkt %.3g, active curves %zu, constraints %zu\n", res.duality_gap_rel, res.kkt_residual,
                    res.active.size(), res.constraints_generated);
      if (!res.notes.empty()) std::printf("note: %s\n", res.notes.c_str());
      if (!mod_report.empty()) write_text_file(mod_report, modulus_report_json(g, res));
      if (mod_exact && !res.is_zero && !(res.exact_feasible && res.exact_kkt)) {
        std::fprintf(stderr, "exact certification incomplete\n");
        return 1;
      }
      return 0;
    }

    if (grad->parsed()) {
      const MetricGraph g = load_space(grad_space);
      const VertexFunction f = load_function(grad_f, g);
      const WeakGradient gf = minimal_weak_gradient(g, f, LocationKind::EdgePoint);
      double sup = 0;
      std::size_t exc = 0;
      for (std::size_t e = 0; e < g.edge_count(); ++e) {
        sup = std::max(sup, gf.g[e]);
        exc += gf.exceptional[e] ? 1 : 0;
      }
      std::printf("gradient sup %.12g over %zu edges (%zu exceptional)\n", sup, g.edge_count(), exc);
      int rc = 0;
      if (grad_thm) {
        if (!(grad_p > 1)) throw InputError("--verify-thm11 needs p > 1");
        ModulusOptions opt;
        opt.exact = grad_exact;
        const RepresentingPlan rp = representing_plan(g, f, grad_p, opt);
        std::printf("representing plan: %zu atoms over %zu support edges\n", rp.plan.atoms.size(), rp.support.size());
        std::printf("mu << plan barycenter on D: %s\n", rp.mu_abscont_on_support ? "yes" : "NO");
        std::printf("esssup ratio identity: %s\n", rp.esssup_identity ? "exact on every support edge" : "FAILED");
        if (!rp.note.empty()) std::printf("note: %s\n", rp.note.c_str());
        if (!rp.mu_abscont_on_support || !rp.esssup_identity) rc = 1;
        if (grad_eps > 0) {
          const ProductiveSet ps = epsilon_productive_set(g, f, symmetrize_plan(rp.plan), grad_eps);
          std::printf("eps-productive set (eps=%g): positive conditional mass at %s of D\n", grad_eps,
                      ps.positive_on_support ? "every location" : "NOT every location");
          if (!ps.positive_on_support) rc = 1;
        }
      } else if (grad_eps > 0) {
        throw InputError("--eps requires --verify-thm11 (the plan comes from the verification)");
      }
      return rc;
    }

    if (diff->parsed()) {
      const MetricGraph g = load_space(diff_space);
      const Atlas atlas = load_atlas(g, diff_chart);
      const VertexFunction f = load_function(diff_f, g);
      detail::JsonWriter w;
      w.begin_object();
      w.key("charts");
      w.begin_array();
      bool all_exact = true;
      for (std::size_t ci = 0; ci < atlas.charts.size(); ++ci) {
        const Differential df = differential(g, atlas.charts[ci], f);
        all_exact = all_exact && df.all_exact;
        if (ci) w.comma();
        w.begin_object();
        w.key("differentials");
        w.begin_object();
        bool first = true;
        for (const auto& [v, d] : df.at) {
          if (!first) w.comma();
          first = false;
          w.key(g.vertex_ids[static_cast<std::size_t>(v)]);
          w.begin_object();
          w.key("norm_matches_gradient");
          w.boolean(d.norm_matches_gradient);
          w.comma();
          w.key("residual");
          w.number(to_double(d.residual));
          w.comma();
          w.key("xi");
          w.begin_array();
          for (std::size_t k = 0; k < d.xi.size(); ++k) {
            if (k) w.comma();
            w.number(d.xi_d[k]);
          }
          w.end_array();
          w.end_object();
        }
        w.end_object();
        w.comma();
        w.key("dim");
        w.integer(static_cast<long long>(atlas.charts[ci].dim()));
        w.comma();
        w.key("max_residual");
        w.number(df.max_residual);
        w.end_object();
      }
      w.end_array();
      w.end_object();
      const std::string text = w.str() + "\n";
      if (diff_out.empty())
        std::fputs(text.c_str(), stdout);
      else
        write_text_file(diff_out, text);
      std::fprintf(stderr, "differentials %s\n", all_exact ? "exact everywhere" : "carry nonzero residuals");
      return 0;
    }

    if (chart->parsed()) {
      if (chart_space.empty()) throw InputError("chart: --space is required");
      const MetricGraph g = load_space(chart_space);
      const Atlas atlas = build_atlas(g, chart_pool(g, chart_pool_path));
      (void)chart_p;
      std::string dims;
      for (const Chart& c : atlas.charts) dims += (dims.empty() ? "" : ", ") + std::to_string(c.dim());
      if (!atlas.zero_dim_stars.empty()) dims += (dims.empty() ? "0" : ", 0");
      std::printf("atlas dimensions: [%s]\n", dims.c_str());
      for (const std::string& wmsg : atlas.warnings) std::printf("warning: %s\n", wmsg.c_str());
      if (!chart_atlas.empty()) write_text_file(chart_atlas, atlas_to_json(g, atlas));
      return 0;
    }

    if (bun->parsed()) {
      const MetricGraph g = load_space(bun_space);
      const Atlas atlas = load_atlas(g, bun_atlas);
      if (atlas.charts.empty()) throw InputError("bundle: atlas has no charts");
      std::vector<std::pair<std::string, VertexFunction>> funcs;
      if (!bun_f.empty())
        funcs.emplace_back(bun_f, load_function(bun_f, g));
      else if (!g.coords.empty()) {
        funcs.emplace_back("x", coordinate_function(g, 0));
        funcs.emplace_back("y", coordinate_function(g, 1));
      }
      RunReport rep;
      if (bun_check == "cocycle") {
        const Chart& base = atlas.charts.front();
        const std::size_t n = base.dim();
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
        std::vector<std::vector<Rational>> A1(n, std::vector<Rational>(n, Rational(0))), A2 = A1, A3 = A1;
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
        const TransitionReport tr = transitions(g, {reparam(A1, "a"), reparam(A2, "b"), reparam(A3, "c")});
        rep.check("bundle", "cocycle", "-", "cocycle identity", "<= 1e-12", canonical_double(tr.cocycle_gap), "1e-12",
                  tr.cocycle_gap <= 1e-12);
        rep.check("bundle", "cocycle", "-", "transition isometry", "exact", tr.all_exact ? "exact" : "approximate",
                  "-", tr.all_exact);
      } else if (bun_check == "norms") {
        if (funcs.empty()) throw InputError("bundle --check norms needs --f or coordinates");
        for (const auto& [name, f] : funcs) {
          const DifferentialSection ds = differential_section(g, atlas.charts, f);
          for (double p : {1.5, 2.0, 3.0}) {
            const double a = section_norm(g, atlas.charts, ds.section, p);
            const double b = gradient_lp_norm(g, atlas.charts, f, p);
            rep.check("bundle", name + " p=" + canonical_double(p), "-", "section norm equals gradient norm",
                      "<= 1e-12", canonical_double(std::abs(a - b)), "1e-12",
                      !ds.all_exact || std::abs(a - b) <= 1e-12);
          }
        }
      } else if (bun_check == "pq") {
        std::vector<VertexFunction> probes;
        for (const auto& [name, f] : funcs) probes.push_back(f);
        const BundleComparison c12 = pq_map(g, atlas.charts, 1.5, 2.0, probes);
        const BundleComparison c23 = pq_map(g, atlas.charts, 2.0, 3.0, probes);
        const BundleComparison c13 = pq_map(g, atlas.charts, 1.5, 3.0, probes);
        rep.check("bundle", "pq (1.5, 2, 3)", "-", "1-Lipschitz", "holds",
                  c12.lipschitz_ok && c23.lipschitz_ok && c13.lipschitz_ok ? "holds" : "violated", "-",
                  c12.lipschitz_ok && c23.lipschitz_ok && c13.lipschitz_ok);
        rep.check("bundle", "pq (1.5, 2, 3)", "-", "surjective", "holds",
                  c12.surjective_ok && c23.surjective_ok && c13.surjective_ok ? "holds" : "violated", "-",
                  c12.surjective_ok && c23.surjective_ok && c13.surjective_ok);
        rep.check("bundle", "pq (1.5, 2, 3)", "-", "intertwines differentials", "holds",
                  c12.intertwines_ok && c23.intertwines_ok && c13.intertwines_ok ? "holds" : "violated", "-",
                  c12.intertwines_ok && c23.intertwines_ok && c13.intertwines_ok);
        rep.check("bundle", "pq (1.5, 2, 3)", "-", "composition law", "exact",
                  pq_composes(c13, c12, c23) ? "exact" : "broken", "-", pq_composes(c13, c12, c23));
      } else if (bun_check == "cheeger") {
        if (funcs.empty()) throw InputError("bundle --check cheeger needs --f or coordinates");
        for (const auto& [name, f] : funcs) {
          const CheegerReport cr = cheeger_compare(g, atlas.charts, f);
          rep.info("bundle", name, "-", "Lip equals weak norm at stars",
                   std::to_string(cr.equal_stars) + "/" + std::to_string(cr.equal_stars + cr.gap_stars));
          std::size_t kernels = 0;
          for (const auto& [v, ca] : cr.at) kernels += ca.kernel_covector.has_value();
          rep.info("bundle", name, "-", "stars with kernel covectors", std::to_string(kernels));
          rep.check("bundle", name, "-", "submetry unit-ball cover", "holds",
                    cr.all_submetry_ok ? "holds" : "violated", "-", cr.all_submetry_ok);
        }
      } else {
        throw InputError("bundle --check must be one of cocycle, norms, pq, cheeger");
      }
      std::fputs(report_to_csv(rep).c_str(), stdout);
      if (!bun_report.empty()) write_text_file(bun_report, report_to_json(rep, bun_check));
      return rep.all_pass() ? 0 : 1;
    }

    if (run->parsed()) {
      const ExperimentConfig cfg = load_config(run_config);
      const RunArtifacts art = run_experiment(cfg);
      std::fputs(report_to_csv(art.report).c_str(), stdout);
      std::fprintf(stderr, "%zu rows, %zu failures\n", art.report.rows.size(), art.report.failures());
      return art.report.all_pass() ? 0 : 1;
    }
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const BudgetError& e) {
    std::fprintf(stderr, "budget exhausted: %s\n", e.what());
    return 3;
  } catch (const CheckError& e) {
    std::fprintf(stderr, "check failed: %s\n", e.what());
    return 1;
  }
  return 2;
}
