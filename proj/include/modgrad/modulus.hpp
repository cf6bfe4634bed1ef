#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modgrad/family.hpp"
#include "modgrad/graph.hpp"
#include "modgrad/lp.hpp"
#include "modgrad/rational.hpp"

namespace modgrad {

struct ModulusOptions {
  bool exact = false;
  double tol_feasibility = 1e-9;  // admissibility slack accepted by the outer loop
  double tol_gap = 1e-6;          // relative duality gap target (reported, checked by tests)
  double tol_inner = 1e-12;       // inner dual stationarity target
  std::size_t max_constraints = 10000;
  std::size_t enum_budget = 200000;
  double rho_max = 1e12;               // cap reported on sigma-null edges
  std::size_t max_exact_curves = 200;  // exact mode is meant for small instances
};

struct ActiveCurve {
  Curve curve;
  double lambda = 0;
  Rational lambda_exact{};
};

struct ModulusResult {
  double p = 2;
  bool exact_mode = false;

  double value = 0;
  std::vector<double> rho;  // optimal density; sigma-null edges carry the cap when useful

  bool value_exact_valid = false;
  Rational value_exact{};
  std::vector<Rational> rho_exact;

  std::vector<ActiveCurve> active;  // curves with positive multipliers
  double dual_value = 0;
  double duality_gap_rel = 0;
  double kkt_residual = 0;
  double slackness_residual = 0;

  bool is_zero = false;
  bool attained = true;
  std::optional<Curve> zero_witness;  // member made of sigma-null edges only
  std::vector<int> null_certificate;  // sigma-null edges every member crosses
  std::vector<int> degenerate_edges;  // sigma-null edges where the density is capped

  bool exact_feasible = false;  // admissibility verified over Q
  bool exact_kkt = false;       // optimality certificate verified over Q
  std::size_t constraints_generated = 0;
  std::string notes;

  void append_note(const std::string& s) {
    if (!notes.empty()) notes += "; ";
    notes += s;
  }
};

// Admissibility check: min over members of the line integral, with the
// witness curve attaining it.
template <class R>
struct Admissibility {
  bool admissible = true;
  bool family_empty = true;
  R min_integral{};
  Curve argmin;
};

template <class R>
Admissibility<R> is_admissible(const MetricGraph& g, const CurveFamily& f, const std::vector<R>& rho,
                               double tol = 0, std::size_t enum_budget = 200000) {
  Admissibility<R> out;
  auto sep = min_line_integral<R>(g, f, rho, enum_budget);
  out.family_empty = !sep.has_curve;
  if (!sep.has_curve) return out;
  out.min_integral = sep.value;
  out.argmin = sep.argmin;
  out.admissible = !(sep.value < scalar_traits<R>::from_double(1.0 - tol));
  return out;
}

namespace detail {

inline CurveFamily restrict_to_positive(const MetricGraph& g, const CurveFamily& f) {
  CurveFamily r = f;
  std::vector<char> allowed(g.edge_count(), 1);
  if (f.allowed) allowed = *f.allowed;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (g.edge_is_null(static_cast<int>(e))) allowed[e] = 0;
  r.allowed = std::move(allowed);
  return r;
}

inline CurveFamily restrict_to_null(const MetricGraph& g, const CurveFamily& f) {
  CurveFamily r = f;
  std::vector<char> allowed(g.edge_count(), 1);
  if (f.allowed) allowed = *f.allowed;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (!g.edge_is_null(static_cast<int>(e))) allowed[e] = 0;
  r.allowed = std::move(allowed);
  return r;
}

// Usage row of a curve: n_gamma(e) * l(e).
inline std::vector<double> usage_row(const MetricGraph& g, const Curve& c) {
  std::vector<double> u(g.edge_count(), 0);
  for (const Step& s : c.steps) u[static_cast<std::size_t>(s.edge)] += g.edges[static_cast<std::size_t>(s.edge)].len;
  return u;
}

inline std::vector<Rational> usage_row_rational(const MetricGraph& g, const Curve& c) {
  std::vector<Rational> u(g.edge_count(), Rational(0));
  for (const Step& s : c.steps)
    u[static_cast<std::size_t>(s.edge)] += rat_of(g.edges[static_cast<std::size_t>(s.edge)].len);
  return u;
}

// Dual ascent for the inner problem on a fixed active set: maximize
//   g(lambda) = sum lambda - (1/q) sum_e w_e rho_e(w),
// where w = U^T lambda and rho_e = (w_e / (p sigma_e))^(1/(p-1)). The
// gradient coordinate of a curve is 1 minus its line integral of rho.
// Projected Newton with damping and an Armijo fallback. Internals run in
// long double: the endgame needs eval differences of order stat^2, and for
// p > 2 the double-precision floor sits right at the feasibility slack.
class InnerDualSolver {
  using Real = long double;

 public:
  InnerDualSolver(const MetricGraph& g, double p, const std::vector<std::vector<double>>& usage)
      : g_(g), p_(p), q_(p / (p - 1)), usage_(usage) {}

  void solve(std::vector<double>& lambda_io, double tol, std::size_t max_iter = 500) {
    const std::size_t m = usage_.size();
    if (lambda_io.size() != m) lambda_io.assign(m, 0);
    std::vector<Real> lambda(lambda_io.begin(), lambda_io.end());
    if (*std::max_element(lambda.begin(), lambda.end()) <= 0) lambda.assign(m, 1.0L);
    rescale_to_unit_integral(lambda);
    Real g_val = eval(lambda);
    for (std::size_t it = 0; it < max_iter; ++it) {
      const std::vector<Real> grad = gradient(lambda);
      Real stat = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (lambda[i] > 0)
          stat = std::max(stat, std::abs(grad[i]));
        else
          stat = std::max(stat, std::max<Real>(0, grad[i]));
      }
      if (stat <= static_cast<Real>(tol)) break;
      if (!try_step(lambda, g_val, newton_direction(lambda, grad)) && !try_step(lambda, g_val, grad)) break;
    }
    lambda_io.assign(lambda.begin(), lambda.end());
  }

  std::vector<double> density(const std::vector<double>& lambda) const {
    const std::vector<Real> rho = density_impl(std::vector<Real>(lambda.begin(), lambda.end()));
    return std::vector<double>(rho.begin(), rho.end());
  }

  double dual_value(const std::vector<double>& lambda) const {
    return static_cast<double>(eval(std::vector<Real>(lambda.begin(), lambda.end())));
  }

 private:
  const MetricGraph& g_;
  double p_, q_;
  const std::vector<std::vector<double>>& usage_;

  bool try_step(std::vector<Real>& lambda, Real& g_val, const std::vector<Real>& dir) const {
    Real step = 1.0L;
    const Real bar = 1e-19L * std::max<Real>(1.0L, std::abs(g_val));
    for (int ls = 0; ls < 70; ++ls) {
      std::vector<Real> cand(lambda.size());
      for (std::size_t i = 0; i < lambda.size(); ++i) cand[i] = std::max<Real>(0, lambda[i] + step * dir[i]);
      const Real cand_val = eval(cand);
      if (cand_val > g_val + bar) {
        lambda = std::move(cand);
        g_val = cand_val;
        return true;
      }
      step /= 2;
    }
    return false;
  }

  std::vector<Real> weights(const std::vector<Real>& lambda) const {
    std::vector<Real> w(g_.edge_count(), 0);
    for (std::size_t i = 0; i < usage_.size(); ++i) {
      if (lambda[i] == 0) continue;
      for (std::size_t e = 0; e < g_.edge_count(); ++e)
        if (usage_[i][e] != 0) w[e] += lambda[i] * static_cast<Real>(usage_[i][e]);
    }
    return w;
  }

  std::vector<Real> density_impl(const std::vector<Real>& lambda) const {
    const std::vector<Real> w = weights(lambda);
    std::vector<Real> rho(g_.edge_count(), 0);
    for (std::size_t e = 0; e < g_.edge_count(); ++e) {
      const Real sigma = static_cast<Real>(g_.edges[e].measure);
      if (sigma <= 0 || w[e] <= 0) continue;
      rho[e] = std::pow(w[e] / (static_cast<Real>(p_) * sigma), 1.0L / (static_cast<Real>(p_) - 1.0L));
    }
    return rho;
  }

  Real eval(const std::vector<Real>& lambda) const {
    const std::vector<Real> w = weights(lambda);
    Real lin = 0, cur = 0;
    for (Real l : lambda) lin += l;
    for (std::size_t e = 0; e < g_.edge_count(); ++e) {
      const Real sigma = static_cast<Real>(g_.edges[e].measure);
      if (sigma <= 0 || w[e] <= 0) continue;
      cur += w[e] * std::pow(w[e] / (static_cast<Real>(p_) * sigma), 1.0L / (static_cast<Real>(p_) - 1.0L));
    }
    return lin - cur / static_cast<Real>(q_);
  }

  std::vector<Real> gradient(const std::vector<Real>& lambda) const {
    const std::vector<Real> rho = density_impl(lambda);
    std::vector<Real> grad(lambda.size(), 1.0L);
    for (std::size_t i = 0; i < lambda.size(); ++i)
      for (std::size_t e = 0; e < g_.edge_count(); ++e)
        if (usage_[i][e] != 0) grad[i] -= static_cast<Real>(usage_[i][e]) * rho[e];
    return grad;
  }

  std::vector<Real> newton_direction(const std::vector<Real>& lambda, const std::vector<Real>& grad) const {
    const std::size_t m = lambda.size();
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < m; ++i)
      if (lambda[i] > 0 || grad[i] > 0) free_idx.push_back(i);
    std::vector<Real> dir(m, 0);
    if (free_idx.empty()) return dir;

    const std::vector<Real> w = weights(lambda);
    std::vector<Real> drho(g_.edge_count(), 0);
    for (std::size_t e = 0; e < g_.edge_count(); ++e) {
      const Real sigma = static_cast<Real>(g_.edges[e].measure);
      if (sigma <= 0 || w[e] <= 0) continue;
      const Real base = w[e] / (static_cast<Real>(p_) * sigma);
      const Real inv = 1.0L / (static_cast<Real>(p_) - 1.0L);
      drho[e] = inv * std::pow(base, inv - 1.0L) / (static_cast<Real>(p_) * sigma);
      if (!std::isfinite(drho[e])) drho[e] = 0;
    }
    const std::size_t k = free_idx.size();
    std::vector<std::vector<Real>> H(k, std::vector<Real>(k, 0));
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a; b < k; ++b) {
        Real h = 0;
        const auto& ua = usage_[free_idx[a]];
        const auto& ub = usage_[free_idx[b]];
        for (std::size_t e = 0; e < g_.edge_count(); ++e)
          if (ua[e] != 0 && ub[e] != 0) h += static_cast<Real>(ua[e]) * static_cast<Real>(ub[e]) * drho[e];
        H[a][b] = H[b][a] = h;
      }
    Real diag_max = 0;
    for (std::size_t a = 0; a < k; ++a) diag_max = std::max(diag_max, H[a][a]);
    const Real damp = std::max<Real>(1e-17L * diag_max, 1e-300L);
    for (std::size_t a = 0; a < k; ++a) H[a][a] += damp;
    std::vector<Real> rhs(k);
    for (std::size_t a = 0; a < k; ++a) rhs[a] = grad[free_idx[a]];
    for (std::size_t col = 0; col < k; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < k; ++r)
        if (std::abs(H[r][col]) > std::abs(H[piv][col])) piv = r;
      std::swap(H[piv], H[col]);
      std::swap(rhs[piv], rhs[col]);
      if (H[col][col] == 0) continue;
      for (std::size_t r = col + 1; r < k; ++r) {
        const Real f = H[r][col] / H[col][col];
        if (f == 0) continue;
        for (std::size_t cc = col; cc < k; ++cc) H[r][cc] -= f * H[col][cc];
        rhs[r] -= f * rhs[col];
      }
    }
    std::vector<Real> d(k, 0);
    for (std::size_t r = k; r-- > 0;) {
      Real acc = rhs[r];
      for (std::size_t cc = r + 1; cc < k; ++cc) acc -= H[r][cc] * d[cc];
      d[r] = H[r][r] != 0 ? acc / H[r][r] : 0;
    }
    for (std::size_t a = 0; a < k; ++a) dir[free_idx[a]] = d[a];
    return dir;
  }

  void rescale_to_unit_integral(std::vector<Real>& lambda) const {
    // rho scales like lambda^(1/(p-1)); pick the scale making the smallest
    // active line integral equal one.
    const std::vector<Real> rho = density_impl(lambda);
    Real min_int = std::numeric_limits<Real>::infinity();
    for (const auto& u : usage_) {
      Real li = 0;
      for (std::size_t e = 0; e < g_.edge_count(); ++e)
        if (u[e] != 0) li += static_cast<Real>(u[e]) * rho[e];
      min_int = std::min(min_int, li);
    }
    if (!(min_int > 0) || !std::isfinite(min_int)) return;
    const Real c = std::pow(1.0L / min_int, static_cast<Real>(p_) - 1.0L);
    for (Real& l : lambda) l *= c;
  }
};

// Exact rational Gaussian elimination for M x = b with row pivoting; free
// variables are pinned to zero. Returns nullopt if inconsistent.
inline std::optional<std::vector<Rational>> solve_linear_rational(std::vector<std::vector<Rational>> M,
                                                                  std::vector<Rational> b) {
  const std::size_t m = M.size();
  const std::size_t n = m == 0 ? 0 : M[0].size();
  std::vector<std::size_t> col_of_row;
  std::size_t row = 0;
  for (std::size_t col = 0; col < n && row < m; ++col) {
    std::size_t piv = row;
    while (piv < m && M[piv][col] == 0) ++piv;
    if (piv == m) continue;
    std::swap(M[piv], M[row]);
    std::swap(b[piv], b[row]);
    const Rational d = M[row][col];
    for (std::size_t c = col; c < n; ++c) M[row][c] /= d;
    b[row] /= d;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == row || M[r][col] == 0) continue;
      const Rational f = M[r][col];
      for (std::size_t c = col; c < n; ++c) M[r][c] -= f * M[row][c];
      b[r] -= f * b[row];
    }
    col_of_row.push_back(col);
    ++row;
  }
  for (std::size_t r = row; r < m; ++r)
    if (b[r] != 0) return std::nullopt;
  std::vector<Rational> x(n, Rational(0));
  for (std::size_t r = 0; r < row; ++r) x[col_of_row[r]] = b[r];
  return x;
}

// p = 1 route: exact rational LP with constraint generation, then a
// lexicographically-least optimal density and least optimal multipliers.
inline void solve_p1(const MetricGraph& g, const CurveFamily& positive, const ModulusOptions& opt,
                     ModulusResult& res) {
  std::vector<Rational> sigma(g.edge_count());
  for (std::size_t e = 0; e < g.edge_count(); ++e) sigma[e] = rat_of(g.edges[e].measure);

  std::vector<Curve> active;
  std::set<Curve> active_keys;
  std::vector<Rational> rho(g.edge_count(), Rational(0));

  {
    std::vector<Rational> ones(g.edge_count(), Rational(1));
    auto sep = min_line_integral<Rational>(g, positive, ones, opt.enum_budget);
    if (!sep.has_curve) {
      res.value = 0;
      res.value_exact_valid = true;
      res.is_zero = true;
      res.append_note("family has no members avoiding sigma-null edges");
      return;
    }
    active.push_back(sep.argmin);
    active_keys.insert(sep.argmin);
  }

  for (;;) {
    LinearProgram<Rational> lp;
    lp.n = g.edge_count();
    lp.c = sigma;
    for (const Curve& c : active) lp.add_row(usage_row_rational(g, c), Rel::GE, Rational(1));
    LPResult<Rational> primal = solve_lp(lp);
    if (primal.status != LPStatus::Optimal) throw CheckError("mod_p(p=1): restricted LP not optimal");
    rho = primal.x;
    auto sep = min_line_integral<Rational>(g, positive, rho, opt.enum_budget);
    if (!sep.has_curve || sep.value >= 1) break;
    if (active.size() >= opt.max_constraints)
      throw BudgetError("mod_p(p=1): constraint budget exhausted at " + std::to_string(active.size()));
    if (!active_keys.insert(sep.argmin).second)
      throw CheckError("mod_p(p=1): separation returned a known constraint");
    active.push_back(sep.argmin);
  }
  res.constraints_generated = active.size();

  {
    LinearProgram<Rational> lp;
    lp.n = g.edge_count();
    lp.c = sigma;
    for (const Curve& c : active) lp.add_row(usage_row_rational(g, c), Rel::GE, Rational(1));
    std::vector<std::vector<Rational>> chain;
    chain.push_back(sigma);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      std::vector<Rational> obj(g.edge_count(), Rational(0));
      obj[e] = Rational(1);
      chain.push_back(std::move(obj));
    }
    auto lex = solve_lp_lexicographic(lp, chain);
    if (!lex) throw CheckError("mod_p(p=1): lexicographic refinement infeasible");
    rho = lex->x;
  }

  std::vector<Rational> lambda(active.size(), Rational(0));
  {
    LinearProgram<Rational> dual;
    dual.n = active.size();
    dual.c.assign(active.size(), Rational(-1));  // max sum lambda as min of the negation
    std::vector<std::vector<Rational>> usage;
    usage.reserve(active.size());
    for (const Curve& c : active) usage.push_back(usage_row_rational(g, c));
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      std::vector<Rational> row(active.size());
      for (std::size_t i = 0; i < active.size(); ++i) row[i] = usage[i][e];
      dual.add_row(std::move(row), Rel::LE, sigma[e]);
    }
    std::vector<std::vector<Rational>> chain;
    chain.push_back(dual.c);
    for (std::size_t i = 0; i < active.size(); ++i) {
      std::vector<Rational> obj(active.size(), Rational(0));
      obj[i] = Rational(1);
      chain.push_back(std::move(obj));
    }
    auto lex = solve_lp_lexicographic(dual, chain);
    if (!lex) throw CheckError("mod_p(p=1): dual LP infeasible");
    lambda = lex->x;
  }

  Rational value(0);
  for (std::size_t e = 0; e < g.edge_count(); ++e) value += sigma[e] * rho[e];
  Rational dual_total(0);
  for (const Rational& l : lambda) dual_total += l;
  if (dual_total != value) throw CheckError("mod_p(p=1): exact strong duality failed");

  res.value = to_double(value);
  res.value_exact = value;
  res.value_exact_valid = true;
  res.dual_value = to_double(dual_total);
  res.duality_gap_rel = 0;
  res.kkt_residual = 0;
  res.slackness_residual = 0;
  res.exact_feasible = true;
  res.exact_kkt = true;
  res.rho_exact.assign(rho.begin(), rho.end());
  for (std::size_t e = 0; e < g.edge_count(); ++e) res.rho[e] = to_double(rho[e]);
  for (std::size_t i = 0; i < active.size(); ++i)
    if (lambda[i] > 0) res.active.push_back({active[i], to_double(lambda[i]), lambda[i]});
}

// Exact-mode certification for p > 1. p = 2 re-solves the tight KKT system
// over Q with an active-set loop; other exponents snap the float density to
// rationals, check admissibility and tightness exactly, and check
// stationarity symbolically when every participating edge belongs to exactly
// one active curve (rational powers compared after clearing the root).
inline void certify_exact(const MetricGraph& g, const CurveFamily& positive, double p, const ModulusOptions& opt,
                          ModulusResult& res) {
  res.exact_feasible = false;
  res.exact_kkt = false;
  if (p == 2.0) {
    std::vector<Curve> tight;
    for (const ActiveCurve& a : res.active)
      if (a.lambda > 1e-10 * std::max(res.value, 1e-300)) tight.push_back(a.curve);
    if (tight.empty()) {
      res.append_note("exact certification skipped: no clearly tight constraints");
      return;
    }
    std::set<Curve> tight_keys(tight.begin(), tight.end());
    for (int round = 0; round < 200; ++round) {
      const std::size_t m = tight.size();
      std::vector<std::vector<Rational>> U;
      U.reserve(m);
      for (const Curve& c : tight) U.push_back(usage_row_rational(g, c));
      std::vector<std::vector<Rational>> M(m, std::vector<Rational>(m, Rational(0)));
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
          Rational acc(0);
          for (std::size_t e = 0; e < g.edge_count(); ++e) {
            if (U[i][e] == 0 || U[j][e] == 0) continue;
            acc += U[i][e] * U[j][e] / (Rational(2) * rat_of(g.edges[e].measure));
          }
          M[i][j] = M[j][i] = acc;
        }
      auto lam = solve_linear_rational(M, std::vector<Rational>(m, Rational(1)));
      if (!lam) {
        res.append_note("exact certification failed: tight KKT system inconsistent");
        return;
      }
      std::size_t worst = m;
      for (std::size_t i = 0; i < m; ++i)
        if ((*lam)[i] < 0 && (worst == m || (*lam)[i] < (*lam)[worst])) worst = i;
      if (worst != m) {
        tight.erase(tight.begin() + static_cast<std::ptrdiff_t>(worst));
        if (tight.empty()) {
          res.append_note("exact certification failed: active set collapsed");
          return;
        }
        continue;
      }
      std::vector<Rational> rho(g.edge_count(), Rational(0));
      for (std::size_t e = 0; e < g.edge_count(); ++e) {
        if (g.edges[e].measure <= 0) continue;
        Rational w(0);
        for (std::size_t i = 0; i < m; ++i)
          if (U[i][e] != 0) w += (*lam)[i] * U[i][e];
        rho[e] = w / (Rational(2) * rat_of(g.edges[e].measure));
      }
      auto adm = is_admissible<Rational>(g, positive, rho, 0, opt.enum_budget);
      if (!adm.family_empty && !adm.admissible) {
        if (tight_keys.insert(adm.argmin).second && tight.size() < opt.max_constraints) {
          tight.push_back(adm.argmin);
          continue;
        }
        res.append_note("exact certification failed: admissibility could not be restored");
        return;
      }
      Rational value(0);
      for (std::size_t e = 0; e < g.edge_count(); ++e)
        if (rho[e] != 0) value += rat_of(g.edges[e].measure) * rho[e] * rho[e];
      res.value_exact = value;
      res.value_exact_valid = true;
      res.value = to_double(value);
      res.rho_exact.assign(rho.begin(), rho.end());
      for (std::size_t e = 0; e < g.edge_count(); ++e) res.rho[e] = to_double(rho[e]);
      res.active.clear();
      for (std::size_t i = 0; i < m; ++i)
        if ((*lam)[i] > 0) res.active.push_back({tight[i], to_double((*lam)[i]), (*lam)[i]});
      res.exact_feasible = true;
      res.exact_kkt = true;
      res.duality_gap_rel = 0;
      res.kkt_residual = 0;
      res.slackness_residual = 0;
      return;
    }
    res.append_note("exact certification failed: active-set loop did not settle");
    return;
  }

  // General p: snap and verify.
  std::vector<Rational> rho(g.edge_count(), Rational(0));
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (res.rho[e] > 0 && g.edges[e].measure > 0) rho[e] = snap_to_rational(res.rho[e]);
  auto adm = is_admissible<Rational>(g, positive, rho, 0, opt.enum_budget);
  if (adm.family_empty) return;
  if (!adm.admissible) {
    if (adm.min_integral <= 0) return;
    for (auto& r : rho) r /= adm.min_integral;
    adm = is_admissible<Rational>(g, positive, rho, 0, opt.enum_budget);
    if (!adm.admissible) return;
  }
  res.exact_feasible = true;
  res.rho_exact.assign(rho.begin(), rho.end());
  for (std::size_t e = 0; e < g.edge_count(); ++e) res.rho[e] = to_double(rho[e]);

  for (const ActiveCurve& a : res.active)
    if (line_integral<Rational>(g, rho, a.curve) != 1) {
      res.append_note("exact stationarity not certified: an active constraint is not exactly tight");
      return;
    }

  long u = 0, v = 1;
  if (!exponent_as_fraction(p, u, v)) {
    res.append_note("exact stationarity not certified: exponent has no small fraction form");
    return;
  }
  std::vector<int> owner(g.edge_count(), -1);
  for (std::size_t i = 0; i < res.active.size(); ++i)
    for (const Step& s : res.active[i].curve.steps) {
      auto& o = owner[static_cast<std::size_t>(s.edge)];
      if (o == -1)
        o = static_cast<int>(i);
      else if (o != static_cast<int>(i)) {
        res.append_note("exact stationarity not certified: active curves overlap");
        return;
      }
    }
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (rho[e] > 0 && owner[e] == -1) {
      res.append_note("exact stationarity not certified: density off the active support");
      return;
    }
  for (const ActiveCurve& a : res.active) {
    // lambda = p sigma rho^(p-1) / (n l) must agree across the curve's edges.
    std::optional<std::pair<Rational, Rational>> first;  // lambda/p = c * r^(p-1)
    std::vector<int> mult = curve_multiplicity(g, a.curve);
    for (const Step& s : a.curve.steps) {
      const std::size_t e = static_cast<std::size_t>(s.edge);
      if (rho[e] <= 0) {
        res.append_note("exact stationarity not certified: active curve uses a zero-density edge");
        return;
      }
      const Rational c = rat_of(g.edges[e].measure) / (rat_of(g.edges[e].len) * Rational(mult[s.edge]));
      if (!first) {
        first = {c, rho[e]};
      } else if (!rational_power_equal(first->first, first->second, c, rho[e], u - v, v)) {
        res.append_note("exact stationarity not certified: multiplier mismatch along an active curve");
        return;
      }
    }
  }
  res.exact_kkt = true;
  res.duality_gap_rel = 0;
  res.kkt_residual = 0;
  res.slackness_residual = 0;
  if (v == 1 && u >= 1) {
    Rational value(0);
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      if (rho[e] != 0) value += rat_of(g.edges[e].measure) * rat_pow(rho[e], u);
    res.value_exact = value;
    res.value_exact_valid = true;
    res.value = to_double(value);
  }
}

// p > 1 route: constraint generation around the dual-Newton inner solver.
inline void solve_smooth(const MetricGraph& g, const CurveFamily& positive, double p, const ModulusOptions& opt,
                         ModulusResult& res) {
  std::vector<Curve> active;
  std::set<Curve> active_keys;
  std::vector<std::vector<double>> usage;
  std::vector<double> lambda;

  {
    std::vector<double> ones(g.edge_count(), 1.0);
    auto sep = min_line_integral<double>(g, positive, ones, opt.enum_budget);
    if (!sep.has_curve) {
      res.value = 0;
      res.value_exact_valid = true;
      res.is_zero = true;
      res.append_note("family has no members avoiding sigma-null edges");
      return;
    }
    active.push_back(sep.argmin);
    active_keys.insert(sep.argmin);
    usage.push_back(detail::usage_row(g, sep.argmin));
    lambda.push_back(1.0);
  }

  std::vector<double> rho;
  for (;;) {
    InnerDualSolver solver(g, p, usage);
    solver.solve(lambda, opt.tol_inner);
    rho = solver.density(lambda);
    auto sep = min_line_integral<double>(g, positive, rho, opt.enum_budget);
    if (!sep.has_curve) throw CheckError("mod_p: separation lost the family");
    if (sep.value >= 1.0 - opt.tol_feasibility) {
      res.dual_value = solver.dual_value(lambda);
      break;
    }
    if (active.size() >= opt.max_constraints)
      throw BudgetError("mod_p: constraint budget exhausted at " + std::to_string(active.size()));
    if (!active_keys.insert(sep.argmin).second)
      throw CheckError("mod_p: inner solver failed to tighten an active constraint");
    active.push_back(sep.argmin);
    usage.push_back(detail::usage_row(g, sep.argmin));
    lambda.push_back(0.0);
  }
  res.constraints_generated = active.size();

  auto sep_final = min_line_integral<double>(g, positive, rho, opt.enum_budget);
  const double scale = sep_final.value;
  std::vector<double> rho_feas = rho;
  std::vector<double> lambda_feas = lambda;
  if (scale > 0 && scale < 1) {
    for (double& r : rho_feas) r /= scale;
    for (double& l : lambda_feas) l /= std::pow(scale, p - 1);
  }

  double primal_value = 0;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (rho_feas[e] > 0) primal_value += g.edges[e].measure * std::pow(rho_feas[e], p);
  res.value = primal_value;
  res.duality_gap_rel = (primal_value - res.dual_value) / std::max(std::abs(res.dual_value), 1e-300);

  {
    std::vector<double> w(g.edge_count(), 0);
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t e = 0; e < g.edge_count(); ++e)
        if (usage[i][e] != 0) w[e] += lambda_feas[i] * usage[i][e];
    double num = 0, den = 0;
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const double sigma = g.edges[e].measure;
      if (sigma <= 0) continue;
      const double lhs = p * sigma * std::pow(rho_feas[e], p - 1);
      num = std::max(num, std::abs(lhs - w[e]));
      den = std::max(den, std::abs(lhs));
    }
    res.kkt_residual = den > 0 ? num / den : num;
    double slack = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (lambda_feas[i] <= 0) continue;
      double li = 0;
      for (std::size_t e = 0; e < g.edge_count(); ++e)
        if (usage[i][e] != 0) li += usage[i][e] * rho_feas[e];
      slack = std::max(slack, std::abs(li - 1.0));
    }
    res.slackness_residual = slack;
  }

  res.rho = rho_feas;
  for (std::size_t i = 0; i < active.size(); ++i)
    if (lambda_feas[i] > 1e-300) res.active.push_back({active[i], lambda_feas[i], Rational(0)});

  if (res.exact_mode) certify_exact(g, positive, p, opt, res);
}

}  // namespace detail

// p-modulus of a curve family by constraint generation; see the detail
// routines for the three routes (LP at p = 1, smooth dual for p > 1, exact
// certification on top when requested).
inline ModulusResult mod_p(const MetricGraph& g, const CurveFamily& family, double p,
                           const ModulusOptions& opt = {}) {
  if (!(p >= 1) || !std::isfinite(p)) throw InputError("mod_p: exponent must satisfy p >= 1");
  ModulusResult res;
  res.p = p;
  res.exact_mode = opt.exact;
  res.rho.assign(g.edge_count(), 0.0);

  if (opt.exact && family.kind == CurveFamily::Kind::Explicit &&
      family.explicit_curves.size() > opt.max_exact_curves)
    throw InputError("exact mode supports at most " + std::to_string(opt.max_exact_curves) + " explicit curves");

  // Zero-modulus fast paths. A member consisting of sigma-null edges only
  // forces value 0 with an unattained infimum; if instead every member
  // crosses a sigma-null edge, the value is 0 with the null edges as
  // certificate and the capped density realizes admissibility.
  {
    CurveFamily nulls_only = detail::restrict_to_null(g, family);
    SeparationResult<double> null_member;
    if (nulls_only.required) {
      auto curves = enumerate_curves(g, nulls_only, opt.enum_budget);
      if (!curves.empty()) {
        null_member.has_curve = true;
        null_member.argmin = curves.front();
      }
    } else {
      std::vector<double> ones(g.edge_count(), 1.0);
      null_member = min_line_integral<double>(g, nulls_only, ones, opt.enum_budget);
    }
    if (null_member.has_curve) {
      res.is_zero = true;
      res.attained = false;
      res.value = 0;
      res.value_exact_valid = true;
      res.zero_witness = null_member.argmin;
      res.append_note("a member lies entirely on sigma-null edges; the infimum 0 is not attained");
      res.exact_feasible = opt.exact;
      res.exact_kkt = opt.exact;
      return res;
    }
  }

  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (g.edge_is_null(static_cast<int>(e)) && family_edge_allowed(family, static_cast<int>(e)))
      res.degenerate_edges.push_back(static_cast<int>(e));

  const ModZeroResult zero = mod_zero_check(g, family, opt.enum_budget);
  if (zero.is_zero) {
    res.is_zero = true;
    res.value = 0;
    res.value_exact_valid = true;
    res.null_certificate = zero.null_edge_certificate;
    for (int e : res.null_certificate) res.rho[static_cast<std::size_t>(e)] = opt.rho_max;
    auto adm = is_admissible<double>(g, family, res.rho, 0, opt.enum_budget);
    res.attained = adm.family_empty || adm.admissible;
    if (!res.attained)
      res.append_note("density cap rho_max is too small to realize admissibility on the null set");
    res.exact_feasible = opt.exact && res.attained;
    res.exact_kkt = opt.exact;
    return res;
  }

  CurveFamily positive = detail::restrict_to_positive(g, family);
  if (p == 1.0)
    detail::solve_p1(g, positive, opt, res);
  else
    detail::solve_smooth(g, positive, p, opt, res);

  if (!res.degenerate_edges.empty() && !res.is_zero) {
    for (int e : res.degenerate_edges) res.rho[static_cast<std::size_t>(e)] = opt.rho_max;
    auto adm = is_admissible<double>(g, family, res.rho, opt.tol_feasibility, opt.enum_budget);
    if (!adm.family_empty && !adm.admissible)
      res.append_note("cap rho_max insufficient for members crossing sigma-null edges");
  }
  return res;
}

}  // namespace modgrad
