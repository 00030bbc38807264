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

#include <random>

#include <gtest/gtest.h>

#include "wkam/simplex.hpp"

namespace wkam {
namespace {

// Minimum of c.x over every basic feasible solution (all column subsets).
double vertex_enumeration(const LinearProgram& lp) {
  const int m = lp.row_count(), n = lp.variable_count();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(m));
  auto rec = [&](auto&& self, int start, int depth) -> void {
    if (depth == m) {
      Eigen::MatrixXd B(m, m);
      for (int i = 0; i < m; ++i) B.col(i) = lp.rows.col(pick[static_cast<std::size_t>(i)]);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
      if (lu.rank() < m) return;
      const Eigen::VectorXd xb = lu.solve(lp.rhs);
      if (xb.minCoeff() < -1e-10) return;
      double v = 0.0;
      for (int i = 0; i < m; ++i) v += lp.objective[pick[static_cast<std::size_t>(i)]] * xb[i];
      best = std::min(best, v);
      return;
    }
    for (int j = start; j < n; ++j) {
      pick[static_cast<std::size_t>(depth)] = j;
      self(self, j + 1, depth + 1);
    }
  };
  rec(rec, 0, 0);
  return best;
}

LinearProgram random_bounded_lp(std::mt19937_64& rng, int m, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LinearProgram lp;
  lp.rows = Eigen::MatrixXd(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) lp.rows(i, j) = g(rng);
  Eigen::VectorXd x0(n), y(m), s(n);
  for (int j = 0; j < n; ++j) x0[j] = u(rng) < 0.5 ? 0.0 : u(rng);
  for (int i = 0; i < m; ++i) y[i] = g(rng);
  for (int j = 0; j < n; ++j) s[j] = u(rng);
  lp.rhs = lp.rows * x0;              // primal feasible
  lp.objective = lp.rows.transpose() * y + s;  // dual feasible, hence bounded
  return lp;
}

TEST(Simplex, MatchesVertexEnumerationOnRandomPrograms) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 2 + trial % 3, n = m + 3 + trial % 4;
    const auto lp = random_bounded_lp(rng, m, n);
    const auto sol = solve_simplex(lp);
    EXPECT_NEAR(sol.value, vertex_enumeration(lp), 1e-9) << "trial " << trial;
    EXPECT_LE(sol.duality_gap, 1e-9);
    EXPECT_LE(sol.primal_residual, 1e-9);
    EXPECT_GE(sol.x.minCoeff(), -1e-12);
    EXPECT_GE(sol.min_reduced_cost, -1e-9);
  }
}

TEST(Simplex, SmallKnownProgram) {
  // min -x1 - 2 x2  s.t.  x1 + x2 + s1 = 4,  x2 + s2 = 3.
  LinearProgram lp;
  lp.objective = Eigen::Vector4d(-1, -2, 0, 0);
  lp.rows = Eigen::MatrixXd(2, 4);
  lp.rows << 1, 1, 1, 0, 0, 1, 0, 1;
  lp.rhs = Eigen::Vector2d(4, 3);
  const auto sol = solve_simplex(lp);
  EXPECT_NEAR(sol.value, -7.0, 1e-12);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-12);
  EXPECT_NEAR(sol.x[1], 3.0, 1e-12);
}

TEST(Simplex, RedundantAndDegenerateRows) {
  std::mt19937_64 rng(32);
  auto lp = random_bounded_lp(rng, 3, 8);
  // Append a scaled copy of row 0 and the zero row.
  LinearProgram big;
  big.rows = Eigen::MatrixXd::Zero(5, 8);
  big.rows.topRows(3) = lp.rows;
  big.rows.row(3) = -2.0 * lp.rows.row(0);
  big.rhs = Eigen::VectorXd::Zero(5);
  big.rhs.head(3) = lp.rhs;
  big.rhs[3] = -2.0 * lp.rhs[0];
  big.objective = lp.objective;
  const auto a = solve_simplex(lp), b = solve_simplex(big);
  EXPECT_NEAR(a.value, b.value, 1e-10);
  EXPECT_GE(b.redundant_rows, 2);
  EXPECT_LE(b.duality_gap, 1e-9);
}

TEST(Simplex, DetectsInfeasibility) {
  LinearProgram lp;
  lp.objective = Eigen::Vector2d(1, 1);
  lp.rows = Eigen::MatrixXd(1, 2);
  lp.rows << 1, 1;
  lp.rhs = Eigen::VectorXd::Constant(1, -1.0);
  EXPECT_THROW(solve_simplex(lp), Infeasible);
}

TEST(Simplex, DetectsUnboundedness) {
  LinearProgram lp;
  lp.objective = Eigen::Vector2d(-1, 0);
  lp.rows = Eigen::MatrixXd(1, 2);
  lp.rows << 1, -1;
  lp.rhs = Eigen::VectorXd::Constant(1, 1.0);
  EXPECT_THROW(solve_simplex(lp), Unbounded);
}

TEST(Simplex, DeterministicAcrossRuns) {
  std::mt19937_64 rng(33);
  const auto lp = random_bounded_lp(rng, 4, 12);
  const auto a = solve_simplex(lp), b = solve_simplex(lp);
  EXPECT_EQ(a.value, b.value);
  EXPECT_TRUE(a.x == b.x);
}

}  // namespace
}  // namespace wkam
