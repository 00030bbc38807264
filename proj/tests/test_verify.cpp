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

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pendulum_fixture.hpp"

namespace wkam {
namespace {

using testing::PendulumData;

bool contains(const NodeSet& s, int node) { return std::binary_search(s.begin(), s.end(), node); }

NodeSet every_node(const SpaceTimeGrid<1>& g) {
  NodeSet s(static_cast<std::size_t>(g.nodes()));
  for (int i = 0; i < g.nodes(); ++i) s[static_cast<std::size_t>(i)] = i;
  return s;
}

TEST(NEpsilon, HugeEpsilonGivesOne) {
  const auto& P = PendulumData::get();
  EXPECT_EQ(n_epsilon(P.table, 1e6), 1);
}

TEST(NEpsilon, RejectsNonPositiveEpsilon) {
  const auto& P = PendulumData::get();
  EXPECT_THROW(n_epsilon(P.table, 0.0), ConfigError);
  EXPECT_THROW(n_epsilon(P.table, -0.5), ConfigError);
}

TEST(NEpsilon, MinimalAndAnUpInterval) {
  const auto& P = PendulumData::get();
  for (const auto& e : P.eps_table) {
    // Oracle: scan every horizon directly.
    int first = -1;
    for (int n = 1; n <= P.win.n_hi && first < 0; ++n) {
      bool ok = true;
      for (int m = n; m <= P.win.n_hi && ok; ++m)
        for (std::size_t p = 0; p < P.table.size() && ok; ++p)
          if (std::isfinite(P.table.h(p)) && P.table.h_n(p, m) < P.table.h(p) - e.eps) ok = false;
      if (ok) first = n;
    }
    EXPECT_EQ(e.N, first) << e.eps;
    for (int n = e.N; n <= P.win.n_hi; ++n) EXPECT_TRUE(n_epsilon_condition(P.table, n, e.eps));
    if (e.N > 1) {
      EXPECT_FALSE(n_epsilon_condition(P.table, e.N - 1, e.eps));
    }
    EXPECT_DOUBLE_EQ(e.chi_cap, e.eps / e.N);
  }
}

TEST(NEpsilon, NonIncreasingInEpsilon) {
  const auto& P = PendulumData::get();
  for (std::size_t i = 1; i < P.eps_table.size(); ++i) EXPECT_GE(P.eps_table[i].N, P.eps_table[i - 1].N);
}

TEST(NEpsilon, EpsilonTableLevels) {
  const auto& P = PendulumData::get();
  ASSERT_EQ(P.eps_table.size(), 11u);
  for (std::size_t i = 0; i < P.eps_table.size(); ++i) EXPECT_EQ(P.eps_table[i].eps, std::ldexp(1.0, -static_cast<int>(i)));
  EXPECT_THROW(epsilon_table(P.table, -1), ConfigError);
}

TEST(AEpsilon, FlatIsEmpty) {
  const SpaceTimeGrid<1> g;
  const DynamicProgram<1> dp(LagrangianSystem<1>::free_particle(), g);
  const auto pair = weak_kam_pair(dp, ViOptions{}, every_node(g));
  EXPECT_TRUE(a_epsilon(pair, 1.0 / 1024).empty());
}

TEST(AEpsilon, PendulumAvoidsTheAubrySet) {
  const auto& P = PendulumData::get();
  const double eps = 0.125;
  const NodeSet a = a_epsilon(P.pair, eps);
  EXPECT_FALSE(a.empty());
  for (int node : P.aubry.nodes) EXPECT_FALSE(contains(a, node));
  for (int node = 0; node < P.grid.nodes(); ++node)
    EXPECT_EQ(contains(a, node), P.pair.u_minus[node] - P.pair.u_plus[node] >= 2 * eps);
  EXPECT_TRUE(contains(a, P.grid.node(P.grid.nx / 2, 0)));
}

TEST(Chi, FlatVanishes) {
  const SpaceTimeGrid<1> g;
  const DynamicProgram<1> dp(LagrangianSystem<1>::free_particle(), g);
  const auto pair = weak_kam_pair(dp, ViOptions{}, every_node(g));
  const std::vector<EpsilonEntry> table = {{0, 1.0, 1, 1.0}, {3, 0.125, 4, 0.03125}};
  const auto chi = chi_field(pair, table);
  for (int node = 0; node < g.nodes(); ++node) EXPECT_EQ(chi[node], 0.0);
}

TEST(Chi, PendulumZeroOnAubryPositiveAway) {
  const auto& P = PendulumData::get();
  for (int node : P.aubry.nodes) EXPECT_EQ(P.chi[node], 0.0);
  for (int k = 0; k < P.grid.nt; ++k) EXPECT_GT(P.chi[P.grid.node(P.grid.nx / 2, k)], 0.0);
  for (int node = 0; node < P.grid.nodes(); ++node) {
    EXPECT_GE(P.chi[node], 0.0);
    EXPECT_LE(P.chi[node], 1.0);
  }
}

TEST(Chi, MonotoneInTheLevelCount) {
  const auto& P = PendulumData::get();
  const auto coarse = chi_field(P.pair, epsilon_table(P.table, 4));
  for (int node = 0; node < P.grid.nodes(); ++node) EXPECT_LE(coarse[node], P.chi[node]);
}

TEST(Curves, SplineSpeedStaysBelowTheBound) {
  const SpaceTimeGrid<1> g;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto c = random_spline_curve(g, rng, 2.0, 8);
    EXPECT_LE(c.max_speed(), 0.9 * g.v_max + 1e-12);
    EXPECT_NEAR(c.b() - c.a(), 2.0, 1e-12);
    EXPECT_NEAR(c.step(), g.dt() / 8, 1e-15);
  }
  EXPECT_THROW(random_spline_curve(g, rng, 2.0, 2), ConfigError);
}

TEST(Curves, SplineIsDeterministic) {
  const SpaceTimeGrid<1> g;
  std::mt19937_64 a(11), b(11);
  const auto c1 = random_spline_curve(g, a, 1.0, 6), c2 = random_spline_curve(g, b, 1.0, 6);
  ASSERT_EQ(c1.points.size(), c2.points.size());
  for (std::size_t i = 0; i < c1.points.size(); ++i) EXPECT_EQ(c1.points[i][0], c2.points[i][0]);
}

TEST(Lemma, ConstantCurveAtTheFixedPoint) {
  const auto& P = PendulumData::get();
  const double eps = 0.125;
  const int N = n_epsilon(P.table, eps);
  const auto c = constant_curve<1>(P.grid, Vec<1>{0.0}, 0.0, 2.0);
  const auto r = check_lemma_formule(P.dp.system(), P.pair, c, eps, N, a_epsilon(P.pair, eps));
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.mu, 0.0);
  EXPECT_NEAR(r.lhs, 2.0 * P.alpha, 1e-12);  // L vanishes at the fixed point
}

TEST(Lemma, RandomSplinesSatisfyBothInequalities) {
  const auto& P = PendulumData::get();
  const double eps = 0.125;
  const int N = n_epsilon(P.table, eps);
  const NodeSet a = a_epsilon(P.pair, eps);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto c = random_spline_curve(P.grid, rng, 2.0, 8);
    const auto r = check_lemma_formule(P.dp.system(), P.pair, c, eps, N, a);
    const auto rc = check_chi_inequality(P.dp.system(), P.pair, P.chi, c);
    EXPECT_TRUE(r.pass) << i << " margin " << r.margin;
    EXPECT_TRUE(rc.pass) << i << " margin " << rc.margin;
    EXPECT_GE(r.tol, 1e-9);
  }
}

TEST(Lemma, DiscreteMinimizersSatisfyTheInequality) {
  const auto& P = PendulumData::get();
  const double eps = 0.125;
  const int N = n_epsilon(P.table, eps);
  const NodeSet a = a_epsilon(P.pair, eps);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& pr = P.table.probes()[i];
    const auto c = dp_minimizer_curve(P.dp, pr.src, pr.dst, 2);
    ASSERT_TRUE(c.discrete_action.has_value());
    EXPECT_NEAR(*c.discrete_action, finite_action(P.dp, pr.src, pr.dst, 2, 0.0), 1e-9);
    EXPECT_TRUE(check_lemma_formule(P.dp.system(), P.pair, c, eps, N, a).pass) << i;
  }
}

TEST(Lemma, NearEqualityOnAnAubryLoop) {
  const auto& P = PendulumData::get();
  const double eps = 0.125;
  const int N = n_epsilon(P.table, eps);
  const int node = P.grid.node(0, 0);
  ASSERT_TRUE(contains(P.aubry.nodes, node));
  const auto c = dp_minimizer_curve(P.dp, node, node, 3);
  const auto r = check_lemma_formule(P.dp.system(), P.pair, c, eps, N, a_epsilon(P.pair, eps));
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.margin, 1e-2);
}

TEST(Lemma, ConcatenationAddsDiscreteActions) {
  const auto& P = PendulumData::get();
  const auto& pr = P.table.probes()[0];
  const auto first = dp_minimizer_curve(P.dp, pr.src, pr.dst, 1);
  const auto second = dp_minimizer_curve(P.dp, pr.dst, pr.src, 1);
  const auto joined = first.concat(second);
  EXPECT_NEAR(*joined.discrete_action, *first.discrete_action + *second.discrete_action, 1e-15);
  EXPECT_EQ(joined.intervals(), first.intervals() + second.intervals());
}

TEST(OrbitAverage, FixedPointHasZeroAverage) {
  const auto& P = PendulumData::get();
  const ValueField<1> zero(P.grid, 0.0);
  EXPECT_NEAR(orbit_average(P.dp.system(), zero, PhasePoint<1>{{0.0}, {0.0}, 0.0}, 3, P.grid.v_max), 0.0, 1e-12);
  const ValueField<1> one(P.grid, 1.0);
  EXPECT_NEAR(orbit_average(P.dp.system(), one, PhasePoint<1>{{0.0}, {0.0}, 0.0}, 3, P.grid.v_max), -1.0, 1e-12);
}

}  // namespace
}  // namespace wkam
