// Copyright 2026 The wkam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file simplex.hpp
 * @brief Dense two-phase revised simplex for  min c.x  s.t.  A x = b, x >= 0.
 *
 * The basis inverse is kept explicitly and updated with product-form eta
 * steps, with a fresh LU refactorization every `refactor_every` pivots.
 * Pricing is Dantzig (most negative reduced cost); after a run of
 * degenerate pivots the solver switches to Bland's smallest-index rule
 * until the objective strictly decreases again, which rules out cycling.
 * Redundant equality rows keep a zero artificial in the basis; artificials
 * never re-enter during phase 2.
 */

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include "wkam/errors.hpp"

namespace wkam {

struct LinearProgram {
  Eigen::VectorXd objective;  // c, one entry per variable
  Eigen::MatrixXd rows;       // A, column-major: one column per variable
  Eigen::VectorXd rhs;        // b
  std::vector<std::string> row_names;

  int variable_count() const { return static_cast<int>(objective.size()); }
  int row_count() const { return static_cast<int>(rhs.size()); }
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-10;
  double pivot_tol = 1e-9;
  double relative_pivot_tol = 1e-6;
  int degenerate_switch = 50;
  int refactor_every = 64;
  int pricing_block = 2048;
  double perturbation = 1e-7;
  int max_iterations = 200000;
};

enum class LpStatus { Optimal };

struct LpSolution {
  LpStatus status = LpStatus::Optimal;
  double value = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd duals;
  double duality_gap = 0.0;        // |c.x - b.y|
  double min_reduced_cost = 0.0;   // over structural columns; >= -tol certifies y
  double primal_residual = 0.0;    // max |A x - b|
  int iterations = 0;
  int redundant_rows = 0;
};

namespace detail {

class RevisedSimplex {
 public:
  RevisedSimplex(const LinearProgram& lp, const SimplexOptions& opt) : opt_(opt) {
    m_ = lp.row_count();
    n_ = lp.variable_count();
    if (lp.rows.rows() != m_ || lp.rows.cols() != n_)
      throw ConfigError("lp", "row matrix shape does not match objective and rhs");
    presolve(lp);
    c_ = lp.objective;
    m_ = static_cast<int>(kept_.size());
    basis_.resize(static_cast<std::size_t>(m_));
    in_basis_.assign(static_cast<std::size_t>(n_ + m_), -1);
    for (int i = 0; i < m_; ++i) {
      basis_[static_cast<std::size_t>(i)] = n_ + i;
      in_basis_[static_cast<std::size_t>(n_ + i)] = i;
    }
    Binv_ = Eigen::MatrixXd::Identity(m_, m_);
  }

  LpSolution solve() {
    // Work on a slightly perturbed right-hand side so that degenerate
    // vertices split; the exact rhs is restored before the final cleanup.
    rhs_ = b_;
    std::uint64_t state = 0x9E3779B97F4A7C15ull;
    for (int i = 0; i < m_; ++i) {
      state = state * 6364136223846793005ull + 1442695040888963407ull;
      const double u = static_cast<double>(state >> 11) * 0x1.0p-53;
      rhs_[i] += opt_.perturbation * (1.0 + u);
    }
    xB_ = rhs_;

    // Phase 1: minimize the sum of artificials.
    Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(n_ + m_);
    cost1.tail(m_).setOnes();
    iterate(cost1);
    const double infeas = xB_artificial_sum();
    if (infeas > opt_.feasibility_tol * (1.0 + b_.lpNorm<Eigen::Infinity>()))
      throw Infeasible("closed-measure LP: phase-1 residual " + std::to_string(infeas));
    drive_out_artificials();

    Eigen::VectorXd cost2 = Eigen::VectorXd::Zero(n_ + m_);
    cost2.head(n_) = c_;
    iterate(cost2);

    rhs_ = b_;
    refactor();
    dual_cleanup(cost2);
    iterate(cost2);
    return finish(cost2);
  }

 private:
  Eigen::VectorXd column(int j) const {
    if (j < n_) return A_.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - n_] = 1.0;
    return e;
  }

  double xB_artificial_sum() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i)
      if (basis_[static_cast<std::size_t>(i)] >= n_) s += std::max(0.0, xB_[i]);
    return s;
  }

  void refactor() {
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = column(basis_[static_cast<std::size_t>(i)]);
    Binv_ = B.partialPivLu().inverse();
    xB_ = Binv_ * rhs_;
    for (int i = 0; i < m_; ++i)
      if (xB_[i] < 0.0 && xB_[i] > -opt_.feasibility_tol) xB_[i] = 0.0;
    since_refactor_ = 0;
  }

  void pivot(int row, int entering, const Eigen::VectorXd& alpha) {
    const double piv = alpha[row];
    const double step = xB_[row] / piv;
    xB_ -= step * alpha;
    xB_[row] = step;
    for (int i = 0; i < m_; ++i)
      if (xB_[i] < 0.0 && xB_[i] > -opt_.feasibility_tol) xB_[i] = 0.0;
    // Eta update of the explicit inverse.
    const Eigen::RowVectorXd prow = Binv_.row(row) / piv;
    for (int i = 0; i < m_; ++i)
      if (i != row && alpha[i] != 0.0) Binv_.row(i) -= alpha[i] * prow;
    Binv_.row(row) = prow;
    const int leaving = basis_[static_cast<std::size_t>(row)];
    in_basis_[static_cast<std::size_t>(leaving)] = -1;
    basis_[static_cast<std::size_t>(row)] = entering;
    in_basis_[static_cast<std::size_t>(entering)] = row;
    if (++since_refactor_ >= opt_.refactor_every) refactor();
    ++iterations_;
  }

  // Chooses an entering structural column or returns -1 at optimality.
  // Dantzig pricing runs over rotating blocks (partial pricing); Bland
  // pricing scans from index 0 and takes the first improving column.
  int price(const Eigen::VectorXd& cost, const Eigen::VectorXd& y, bool bland) {
    const int block = std::max(1, opt_.pricing_block);
    const int nblocks = (n_ + block - 1) / block;
    for (int b = 0; b < nblocks; ++b) {
      const int blk = bland ? b : (cursor_ + b) % nblocks;
      const int start = blk * block;
      const int len = std::min(block, n_ - start);
      const Eigen::VectorXd d =
          cost.segment(start, len) - A_.middleCols(start, len).transpose() * y;
      int best = -1;
      double bestd = -opt_.optimality_tol;
      for (int i = 0; i < len; ++i) {
        const int j = start + i;
        if (in_basis_[static_cast<std::size_t>(j)] >= 0 || !(d[i] < bestd)) continue;
        best = j;
        if (bland) return j;
        bestd = d[i];
      }
      if (best >= 0) {
        cursor_ = blk;
        return best;
      }
    }
    return -1;
  }

  // Lexicographic minimum-ratio test: smallest x_B[i]/alpha[i], ties broken
  // by comparing rows of B^-1 / alpha[i] in order. Starting from B = I this
  // keeps every row of [x_B | B^-1] lexicographically positive, which
  // excludes cycling under any entering rule. Under `bland` the remaining
  // ties go to the smallest basic index.
  int leaving_row(const Eigen::VectorXd& alpha, bool bland) const {
    int row = -1;
    double best = std::numeric_limits<double>::infinity();
    const double min_pivot = std::max(opt_.pivot_tol, opt_.relative_pivot_tol * alpha.maxCoeff());
    for (int i = 0; i < m_; ++i) {
      if (alpha[i] <= min_pivot) continue;
      const double r = std::max(0.0, xB_[i]) / alpha[i];
      const double tie = 1e-12 * (1.0 + std::abs(best));
      if (row < 0 || r < best - tie) {
        row = i;
        best = r;
        continue;
      }
      if (r > best + tie) continue;
      int cmp = 0;
      for (int c = 0; c < m_ && cmp == 0; ++c) {
        const double a = Binv_(i, c) / alpha[i];
        const double b = Binv_(row, c) / alpha[row];
        if (a < b - 1e-12) cmp = -1;
        else if (a > b + 1e-12) cmp = 1;
      }
      if (cmp == 0 && bland)
        cmp = basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(row)] ? -1 : 1;
      if (cmp < 0) {
        row = i;
        best = std::min(best, r);
      }
    }
    return row;
  }

  // Runs simplex iterations on `cost` (structural columns only; artificials
  // may leave the basis but never re-enter).
  void iterate(const Eigen::VectorXd& cost) {
    int degenerate_run = 0;
    for (;;) {
      if (iterations_ >= opt_.max_iterations)
        throw NotConverged("simplex: iteration limit reached");
      Eigen::VectorXd cB(m_);
      for (int i = 0; i < m_; ++i) cB[i] = cost[basis_[static_cast<std::size_t>(i)]];
      const Eigen::VectorXd y = Binv_.transpose() * cB;
      const bool bland = degenerate_run >= opt_.degenerate_switch;
      const int entering = price(cost, y, bland);
      if (entering < 0) return;
      const Eigen::VectorXd alpha = Binv_ * column(entering);
      const int row = leaving_row(alpha, bland);
      if (row < 0) throw Unbounded("simplex: unbounded direction on a bounded polytope");
      const double step = std::max(0.0, xB_[row]) / alpha[row];
      degenerate_run = step <= 1e-14 ? degenerate_run + 1 : 0;
      pivot(row, entering, alpha);
    }
  }

  // Dual simplex passes that restore primal feasibility after the rhs
  // perturbation is removed; the basis stays dual feasible throughout.
  void dual_cleanup(const Eigen::VectorXd& cost) {
    for (;;) {
      if (iterations_ >= opt_.max_iterations)
        throw NotConverged("simplex: iteration limit reached in cleanup");
      int r = -1;
      for (int i = 0; i < m_; ++i)
        if (xB_[i] < -opt_.feasibility_tol && (r < 0 || xB_[i] < xB_[r])) r = i;
      if (r < 0) {
        for (int i = 0; i < m_; ++i) xB_[i] = std::max(0.0, xB_[i]);
        return;
      }
      Eigen::VectorXd cB(m_);
      for (int i = 0; i < m_; ++i) cB[i] = cost[basis_[static_cast<std::size_t>(i)]];
      const Eigen::VectorXd y = Binv_.transpose() * cB;
      const Eigen::VectorXd d = cost.head(n_) - A_.transpose() * y;
      const Eigen::VectorXd rho = A_.transpose() * Binv_.row(r).transpose();
      int entering = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n_; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)] >= 0 || rho[j] >= -opt_.pivot_tol) continue;
        const double ratio = std::max(0.0, d[j]) / -rho[j];
        if (ratio < best) {
          best = ratio;
          entering = j;
        }
      }
      if (entering < 0) throw Infeasible("closed-measure LP: dual cleanup found no entering column");
      pivot(r, entering, Binv_ * column(entering));
    }
  }

  void drive_out_artificials() {
    for (int r = 0; r < m_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] < n_) continue;
      const Eigen::VectorXd rho = Binv_.row(r).transpose();
      const Eigen::VectorXd row = A_.transpose() * rho;
      int best = -1;
      double mag = 1e-7;
      for (int j = 0; j < n_; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)] >= 0) continue;
        if (std::abs(row[j]) > mag) {
          mag = std::abs(row[j]);
          best = j;
        }
      }
      if (best < 0) {
        ++redundant_;
        continue;
      }
      const Eigen::VectorXd alpha = Binv_ * column(best);
      pivot(r, best, alpha);
    }
    refactor();
  }

  LpSolution finish(const Eigen::VectorXd& cost) {
    refactor();
    LpSolution sol;
    sol.x = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i) {
      const int j = basis_[static_cast<std::size_t>(i)];
      if (j < n_) sol.x[j] = std::max(0.0, xB_[i]);
    }
    Eigen::VectorXd cB(m_);
    for (int i = 0; i < m_; ++i) cB[i] = cost[basis_[static_cast<std::size_t>(i)]];
    Eigen::VectorXd y = Binv_.transpose() * cB;
    sol.value = c_.dot(sol.x);
    const Eigen::VectorXd d = c_ - A_.transpose() * y;
    sol.min_reduced_cost = n_ > 0 ? d.minCoeff() : 0.0;
    sol.duality_gap = std::abs(sol.value - b_.dot(y));
    sol.duals = Eigen::VectorXd::Zero(rows_in_);
    for (int i = 0; i < m_; ++i)
      sol.duals[kept_[static_cast<std::size_t>(i)]] = scale_[static_cast<std::size_t>(i)] * y[i];
    sol.iterations = iterations_;
    sol.redundant_rows = redundant_;
    return sol;
  }

  // Scales every row to unit max-norm with a nonnegative right-hand side and
  // drops rows that repeat an earlier row up to a factor (the duplicated
  // +-mode rows of trigonometric bases). Dropped rows must be consistent.
  void presolve(const LinearProgram& lp) {
    rows_in_ = lp.row_count();
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    for (int i = 0; i < rows_in_; ++i) {
      Eigen::RowVectorXd r = lp.rows.row(i);
      double bi = lp.rhs[i];
      const double mag = std::max(r.lpNorm<Eigen::Infinity>(), std::abs(bi));
      if (mag == 0.0) continue;
      double f = 1.0 / mag;
      // Fix the sign by the rhs, else by the first nonzero coefficient.
      int lead = 0;
      while (lead < r.size() && r[lead] == 0.0) ++lead;
      if (bi < 0.0 || (bi == 0.0 && lead < r.size() && r[lead] < 0.0)) f = -f;
      r *= f;
      bi *= f;
      bool duplicate = false;
      for (std::size_t q = 0; q < rows.size() && !duplicate; ++q)
        duplicate = std::abs(rhs[q] - bi) <= 1e-12 && (rows[q] - r).lpNorm<Eigen::Infinity>() <= 1e-12;
      if (duplicate) continue;
      rows.push_back(r);
      rhs.push_back(bi);
      kept_.push_back(i);
      scale_.push_back(f);
    }
    A_.resize(static_cast<Eigen::Index>(rows.size()), n_);
    b_.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t q = 0; q < rows.size(); ++q) {
      A_.row(static_cast<Eigen::Index>(q)) = rows[q];
      b_[static_cast<Eigen::Index>(q)] = rhs[q];
    }
    redundant_ = rows_in_ - static_cast<int>(rows.size());
  }

 private:
  SimplexOptions opt_;
  int m_ = 0, n_ = 0;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_, c_, rhs_;
  std::vector<int> basis_;
  std::vector<int> in_basis_;
  Eigen::MatrixXd Binv_;
  Eigen::VectorXd xB_;
  int since_refactor_ = 0;
  int iterations_ = 0;
  int redundant_ = 0;
  int cursor_ = 0;
  int rows_in_ = 0;
  std::vector<int> kept_;
  std::vector<double> scale_;
};

}  // namespace detail

/// Optimal basic solution of min c.x, A x = b, x >= 0.
inline LpSolution solve_simplex(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  LpSolution sol;
  try {
    sol = detail::RevisedSimplex(lp, opt).solve();
  } catch (const Infeasible&) {
    // A right-hand side on the boundary of the feasible cone can be pushed
    // outside it by the perturbation; only the exact problem decides.
    if (opt.perturbation == 0.0) throw;
    SimplexOptions exact = opt;
    exact.perturbation = 0.0;
    sol = detail::RevisedSimplex(lp, exact).solve();
  }
  sol.primal_residual = (lp.rows * sol.x - lp.rhs).lpNorm<Eigen::Infinity>();
  return sol;
}

}  // namespace wkam
