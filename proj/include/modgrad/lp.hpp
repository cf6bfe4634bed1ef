#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "modgrad/errors.hpp"
#include "modgrad/rational.hpp"

namespace modgrad {

enum class Rel { LE, GE, EQ };

template <class R>
struct LPRow {
  std::vector<R> a;
  Rel rel = Rel::LE;
  R b{};
};

// min c.x subject to rows, x >= 0. Small dense problems only.
template <class R>
struct LinearProgram {
  std::size_t n = 0;
  std::vector<R> c;
  std::vector<LPRow<R>> rows;

  void add_row(std::vector<R> a, Rel rel, R b) { rows.push_back({std::move(a), rel, std::move(b)}); }
};

enum class LPStatus { Optimal, Infeasible, Unbounded };

template <class R>
struct LPResult {
  LPStatus status = LPStatus::Infeasible;
  R value{};
  std::vector<R> x;
  std::vector<R> dual;  // shadow price per input row (>= rows give nonnegative duals)
};

// Two-phase tableau simplex with Bland's rule, exact over a rational scalar.
template <class R>
class SimplexSolver {
 public:
  explicit SimplexSolver(const LinearProgram<R>& lp) : lp_(lp) { build(); }

  LPResult<R> solve() {
    LPResult<R> res;
    // Phase I: minimize artificial sum.
    if (!run(cost_phase1_, true)) throw InputError("simplex: phase I unbounded (internal error)");
    R art_sum{};
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] >= art_begin_) art_sum += rhs_[i];
    if (art_sum != R{}) {
      res.status = LPStatus::Infeasible;
      return res;
    }
    // Drive degenerate artificials out of the basis so phase II pivots can
    // never lift them above zero. A row with no real replacement column is
    // redundant and stays frozen (its entering coefficients are all zero).
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < art_begin_) continue;
      for (std::size_t j = 0; j < art_begin_; ++j) {
        if (tab_[i][j] == R{}) continue;
        bool basic = false;
        for (std::size_t k = 0; k < m_; ++k)
          if (basis_[k] == j) {
            basic = true;
            break;
          }
        if (basic) continue;
        pivot(i, j);
        break;
      }
    }
    if (!run(cost_phase2_, false)) {
      res.status = LPStatus::Unbounded;
      return res;
    }
    res.status = LPStatus::Optimal;
    res.x.assign(lp_.n, R{});
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < lp_.n) res.x[basis_[i]] = rhs_[i];
    res.value = R{};
    for (std::size_t j = 0; j < lp_.n; ++j) res.value += lp_.c[j] * res.x[j];
    res.dual = extract_duals();
    return res;
  }

 private:
  const LinearProgram<R>& lp_;
  std::size_t m_ = 0, ncols_ = 0, art_begin_ = 0;
  std::vector<std::vector<R>> tab_;  // m x ncols
  std::vector<R> rhs_;
  std::vector<std::size_t> basis_;
  std::vector<R> cost_phase1_, cost_phase2_;
  std::vector<int> row_sign_;           // +1 if the row kept its sign, -1 if negated for b >= 0
  std::vector<std::size_t> aux_col_;    // per input row: its slack/surplus column (SIZE_MAX for EQ)
  std::vector<std::size_t> art_col_;    // per input row: its artificial column (SIZE_MAX if none)

  void build() {
    m_ = lp_.rows.size();
    // Count slacks/surpluses and artificials.
    std::size_t slack_count = 0;
    for (const auto& row : lp_.rows)
      if (row.rel != Rel::EQ) ++slack_count;
    art_begin_ = lp_.n + slack_count;  // provisional; artificials appended after slacks
    std::size_t art_count = 0;

    tab_.assign(m_, std::vector<R>());
    rhs_.assign(m_, R{});
    basis_.assign(m_, 0);
    row_sign_.assign(m_, 1);
    aux_col_.assign(m_, static_cast<std::size_t>(-1));
    art_col_.assign(m_, static_cast<std::size_t>(-1));

    // First pass: normalize rows so b >= 0 and decide which need artificials.
    std::vector<std::vector<R>> a(m_);
    std::vector<Rel> rel(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& row = lp_.rows[i];
      if (row.a.size() != lp_.n) throw InputError("simplex: row width mismatch");
      a[i] = row.a;
      rel[i] = row.rel;
      rhs_[i] = row.b;
      if (rhs_[i] < R{}) {
        row_sign_[i] = -1;
        for (auto& v : a[i]) v = -v;
        rhs_[i] = -rhs_[i];
        if (rel[i] == Rel::LE)
          rel[i] = Rel::GE;
        else if (rel[i] == Rel::GE)
          rel[i] = Rel::LE;
      }
    }
    std::size_t next_slack = lp_.n;
    for (std::size_t i = 0; i < m_; ++i) {
      if (rel[i] != Rel::EQ) aux_col_[i] = next_slack++;
      const bool needs_art = rel[i] != Rel::LE;  // GE surplus starts infeasible, EQ always
      if (needs_art) ++art_count;
    }
    ncols_ = lp_.n + slack_count + art_count;
    std::size_t next_art = lp_.n + slack_count;
    for (std::size_t i = 0; i < m_; ++i) {
      tab_[i].assign(ncols_, R{});
      for (std::size_t j = 0; j < lp_.n; ++j) tab_[i][j] = a[i][j];
      if (rel[i] == Rel::LE) {
        tab_[i][aux_col_[i]] = R(1);
        basis_[i] = aux_col_[i];
      } else if (rel[i] == Rel::GE) {
        tab_[i][aux_col_[i]] = R(-1);
        art_col_[i] = next_art++;
        tab_[i][art_col_[i]] = R(1);
        basis_[i] = art_col_[i];
      } else {
        art_col_[i] = next_art++;
        tab_[i][art_col_[i]] = R(1);
        basis_[i] = art_col_[i];
      }
    }
    art_begin_ = lp_.n + slack_count;

    cost_phase1_.assign(ncols_, R{});
    for (std::size_t j = art_begin_; j < ncols_; ++j) cost_phase1_[j] = R(1);
    cost_phase2_.assign(ncols_, R{});
    for (std::size_t j = 0; j < lp_.n; ++j) cost_phase2_[j] = lp_.c[j];
  }

  // Returns false on unboundedness. Artificials never re-enter in phase II.
  bool run(const std::vector<R>& cost, bool phase1) {
    for (;;) {
      // Reduced costs via the basic cost multipliers.
      std::optional<std::size_t> enter;
      for (std::size_t j = 0; j < ncols_; ++j) {
        if (!phase1 && j >= art_begin_) continue;
        bool basic = false;
        for (std::size_t i = 0; i < m_; ++i)
          if (basis_[i] == j) {
            basic = true;
            break;
          }
        if (basic) continue;
        R rc = cost[j];
        for (std::size_t i = 0; i < m_; ++i)
          if (cost[basis_[i]] != R{}) rc -= cost[basis_[i]] * tab_[i][j];
        if (rc < R{}) {
          enter = j;  // Bland: first improving index
          break;
        }
      }
      if (!enter) return true;
      // Ratio test, Bland tie-break on the leaving basis index.
      std::optional<std::size_t> leave;
      R best_ratio{};
      for (std::size_t i = 0; i < m_; ++i) {
        if (tab_[i][*enter] <= R{}) continue;
        const R ratio = rhs_[i] / tab_[i][*enter];
        if (!leave || ratio < best_ratio || (ratio == best_ratio && basis_[i] < basis_[*leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
      if (!leave) return false;
      pivot(*leave, *enter);
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    const R piv = tab_[r][c];
    for (auto& v : tab_[r]) v /= piv;
    rhs_[r] /= piv;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      const R f = tab_[i][c];
      if (f == R{}) continue;
      for (std::size_t j = 0; j < ncols_; ++j) tab_[i][j] -= f * tab_[r][j];
      rhs_[i] -= f * rhs_[r];
    }
    basis_[r] = c;
  }

  std::vector<R> extract_duals() {
    // y_i from the reduced cost of row i's own unit column, undoing the sign
    // normalization applied during build.
    std::vector<R> y(m_, R{});
    auto reduced_cost = [&](std::size_t j) {
      R rc = cost_phase2_[j];
      for (std::size_t i = 0; i < m_; ++i)
        if (cost_phase2_[basis_[i]] != R{}) rc -= cost_phase2_[basis_[i]] * tab_[i][j];
      return rc;
    };
    for (std::size_t i = 0; i < m_; ++i) {
      R yi{};
      if (art_col_[i] != static_cast<std::size_t>(-1)) {
        yi = -reduced_cost(art_col_[i]);  // artificial column is +e_i
      } else {
        yi = -reduced_cost(aux_col_[i]);  // LE slack column is +e_i
      }
      if (row_sign_[i] < 0) yi = -yi;
      y[i] = yi;
    }
    return y;
  }
};

template <class R>
LPResult<R> solve_lp(const LinearProgram<R>& lp) {
  SimplexSolver<R> s(lp);
  return s.solve();
}

// Sequentially minimizes each objective, pinning the previous optimum with an
// equality row; yields the lexicographically least point of the chain.
// Returns nullopt if the first objective is infeasible; unbounded objectives
// raise CheckError (callers pin free directions beforehand).
template <class R>
std::optional<LPResult<R>> solve_lp_lexicographic(LinearProgram<R> lp, const std::vector<std::vector<R>>& objectives) {
  LPResult<R> last;
  for (std::size_t k = 0; k < objectives.size(); ++k) {
    lp.c = objectives[k];
    if (lp.c.size() != lp.n) throw InputError("lexicographic LP: objective width mismatch");
    last = solve_lp(lp);
    if (last.status == LPStatus::Infeasible) {
      if (k == 0) return std::nullopt;
      throw CheckError("lexicographic LP: pinned stage became infeasible");
    }
    if (last.status == LPStatus::Unbounded) throw CheckError("lexicographic LP: objective unbounded");
    lp.add_row(objectives[k], Rel::EQ, last.value);
  }
  return last;
}

}  // namespace modgrad
