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
#include "wkam/alpha.hpp"

namespace wkam {
namespace {

using testing::PendulumData;

AlphaOptions with_lp(bool lp) {
  AlphaOptions o;
  o.use_lp = lp;
  return o;
}

TEST(AlphaFlat, BothRoutesGiveHalfCSquared) {
  const AlphaExplorer<1> ex(LagrangianSystem<1>::free_particle(), SpaceTimeGrid<1>{}, with_lp(true));
  for (double c : {0.0, 0.25, 0.5, 1.0, -0.75}) {
    const auto s = ex.eval(Vec<1>{c});
    EXPECT_NEAR(s.alpha_vi, 0.5 * c * c, 1e-9) << c;
    EXPECT_NEAR(s.alpha_lp, 0.5 * c * c, 1e-9) << c;
    EXPECT_TRUE(s.consistent);
    EXPECT_LE(s.duality_gap, 1e-9);
  }
}

TEST(AlphaFlat, TimeComponentCancels) {
  const AlphaExplorer<1> ex(LagrangianSystem<1>::free_particle(), SpaceTimeGrid<1>{}, with_lp(true));
  const auto s = ex.eval_form(OneForm<1>::constant(Vec<1>{0.0}, 0.6));
  EXPECT_NEAR(s.alpha_vi, 0.0, 1e-9);
  EXPECT_NEAR(s.alpha_lp, 0.0, 1e-9);
}

TEST(AlphaPendulum, ZeroAtTheOrigin) {
  const AlphaExplorer<1> ex(LagrangianSystem<1>::pendulum(), SpaceTimeGrid<1>{}, with_lp(true));
  const auto s = ex.eval(Vec<1>{0.0});
  EXPECT_NEAR(s.alpha_vi, 0.0, 1e-9);
  EXPECT_NEAR(s.alpha_lp, 0.0, 1e-9);
}

TEST(AlphaPendulum, ExactFormsOnlyShiftWithinDiscretization) {
  const AlphaExplorer<1> ex(LagrangianSystem<1>::pendulum(), SpaceTimeGrid<1>{}, with_lp(true));
  OneForm<1> w = OneForm<1>::constant(Vec<1>{0.75});
  OneForm<1> shifted = w;
  shifted.exact.terms.push_back({IVec<1>{1}, 1, 0.05, 0.02});
  const auto a = ex.eval_form(w), b = ex.eval_form(shifted);
  EXPECT_NEAR(a.alpha_lp, b.alpha_lp, 1e-9);  // the perturbation lies in the test basis
  EXPECT_NEAR(a.alpha_vi, b.alpha_vi, 1e-2);
}

TEST(AlphaProperties, ConvexOnRandomTriples) {
  SpaceTimeGrid<1> g;
  g.nx = 32;
  g.nt = 8;
  g.nv = 33;
  const AlphaExplorer<1> ex(LagrangianSystem<1>::pendulum(), g, with_lp(false));
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> c(-1.5, 1.5), lam(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double c1 = c(rng), c2 = c(rng), l = lam(rng);
    const double mid = ex.eval(Vec<1>{l * c1 + (1 - l) * c2}).alpha_vi;
    const double chord = l * ex.eval(Vec<1>{c1}).alpha_vi + (1 - l) * ex.eval(Vec<1>{c2}).alpha_vi;
    EXPECT_LE(mid, chord + 3e-2);
  }
}

/// Discrete flat alpha: sup over DP lattice velocities of c v - v^2 / 2.
double flat_lattice_alpha(const SpaceTimeGrid<1>& g, double c) {
  const double unit = g.dx() / g.dt();
  double best = -1e300;
  for (int j = -g.nx; j <= g.nx; ++j) {
    const double v = j * unit;
    if (std::abs(v) <= g.v_max + 1e-12) best = std::max(best, c * v - 0.5 * v * v);
  }
  return best;
}

TEST(Faces, FlatHasNoFace) {
  const SpaceTimeGrid<1> g;
  const AlphaExplorer<1> ex(LagrangianSystem<1>::free_particle(), g, with_lp(true));
  const auto rep = face_scan<1>(ex, Vec<1>{0.0}, direction_fan<1>(), {0.2, 0.25, 0.5, 1.0}, 3e-2);
  ASSERT_EQ(rep.directions.size(), 1u);
  EXPECT_EQ(rep.directions[0].delta_star, 0.0);
  EXPECT_EQ(rep.vect_dim, 0);
  for (const auto& row : rep.directions[0].rows) {
    EXPECT_NEAR(row.symmetric_vi, 2.0 * flat_lattice_alpha(g, row.delta), 1e-9);
    EXPECT_GT(row.symmetric_vi, 3e-2);
    EXPECT_FALSE(row.certified);
  }
}

TEST(Faces, PendulumSegmentAroundZero) {
  const AlphaExplorer<1> ex(LagrangianSystem<1>::pendulum(), SpaceTimeGrid<1>{}, with_lp(true));
  const auto rep = face_scan<1>(ex, Vec<1>{0.0}, direction_fan<1>(), {0.1, 0.3, 0.5}, 3e-2);
  const auto& fp = rep.directions[0];
  EXPECT_GE(fp.delta_star, 0.5);
  EXPECT_TRUE(fp.slope_consistent);
  for (const auto& row : fp.rows) {
    EXPECT_TRUE(row.certified) << row.delta;
    EXPECT_GE(row.symmetric_vi, -3e-2);
    EXPECT_GE(row.symmetric_lp, -3e-2);
  }
  EXPECT_EQ(rep.vect_dim, 1);
}

TEST(Faces, PendulumSegmentOnTheDoubledGrid) {
  // Independent recomputation at twice the resolution (value iteration only).
  SpaceTimeGrid<1> fine;
  fine.nx = 128;
  fine.nt = 32;
  fine.nv = 129;
  const AlphaExplorer<1> ex(LagrangianSystem<1>::pendulum(), fine, with_lp(false));
  for (double d : {0.1, 0.3, 0.5})
    EXPECT_LE(std::abs(ex.eval(Vec<1>{d}).alpha_vi + ex.eval(Vec<1>{-d}).alpha_vi), 3e-2) << d;
}

TEST(Faces, DirectionFanCoversTheCircle) {
  const auto fan = direction_fan<2>(8);
  ASSERT_EQ(fan.size(), 8u);
  for (const auto& e : fan) EXPECT_NEAR(norm<2>(e), 1.0, 1e-15);
}

TEST(E0Witness, ZeroFormIsTrivial) {
  const auto& P = PendulumData::get();
  const AlphaExplorer<1> ex(LagrangianSystem<1>::pendulum(), P.grid, with_lp(false));
  EXPECT_TRUE(e0_witness_test(ex, OneForm<1>{}, P.aubry.nodes, P.pair, P.table, 3e-2).certified);
}

TEST(E0Witness, BumpAwayFromTheAubrySet) {
  const auto& P = PendulumData::get();
  const AlphaExplorer<1> ex(LagrangianSystem<1>::pendulum(), P.grid, with_lp(true));
  OneForm<1> bump;
  bump.bumps.push_back({0, 0.3, 0.7, 1.0});
  const auto rep = e0_witness_test(ex, bump, P.aubry.nodes, P.pair, P.table, 3e-2);
  EXPECT_GT(rep.delta, 0.0);
  EXPECT_TRUE(rep.certified);
  EXPECT_LE(std::abs(rep.symmetric_vi), 3e-2);
  EXPECT_LE(std::abs(rep.symmetric_lp), 3e-2);

  // Doubled-grid recomputation of the same symmetric sum.
  SpaceTimeGrid<1> fine;
  fine.nx = 128;
  fine.nt = 32;
  fine.nv = 129;
  const AlphaExplorer<1> fx(LagrangianSystem<1>::pendulum(), fine, with_lp(false));
  const double sym = fx.eval_form(bump.scaled(rep.delta)).alpha_vi + fx.eval_form(bump.scaled(-rep.delta)).alpha_vi -
                     2.0 * fx.eval(Vec<1>{0.0}).alpha_vi;
  EXPECT_LE(std::abs(sym), 3e-2);
}

TEST(E0Witness, OverlapIsRejected) {
  const auto& P = PendulumData::get();
  const AlphaExplorer<1> ex(LagrangianSystem<1>::pendulum(), P.grid, with_lp(false));
  OneForm<1> bump;
  bump.bumps.push_back({0, 0.9, 1.1, 1.0});
  EXPECT_THROW(e0_witness_test(ex, bump, P.aubry.nodes, P.pair, P.table, 3e-2), SupportOverlap);
}

TEST(G0Witness, TrivialClass) {
  const auto& P = PendulumData::get();
  const auto w = g0_witness_build<1>(Vec<1>{0.0}, 0.0, 0.0, P.pair.u_minus, P.pair.u_minus, P.aubry.nodes);
  EXPECT_EQ(w.residual, 0.0);
  for (std::size_t n = 0; n < w.corrected.wx.size(); ++n) {
    EXPECT_EQ(w.corrected.wx[n][0], 0.0);
    EXPECT_EQ(w.corrected.wt[n], 0.0);
  }
}

TEST(G0Witness, PendulumInsideTheFace) {
  const auto& P = PendulumData::get();
  const double c = 0.3;
  const DynamicProgram<1> tdp(LagrangianSystem<1>::pendulum().tilted(Vec<1>{c}), P.grid);
  const auto tpair = weak_kam_pair(tdp, P.vi, P.aubry.nodes);
  const auto w = g0_witness_build<1>(Vec<1>{c}, P.pair.alpha, tpair.alpha, P.pair.u_minus, tpair.u_minus, P.aubry.nodes);
  EXPECT_LE(w.residual, 5e-2);
  const auto [cls, tau] = w.corrected.cohomology();
  EXPECT_NEAR(cls[0], c, 1e-8);
  EXPECT_NEAR(tau, P.pair.alpha - tpair.alpha, 1e-8);

  // Doubled grid: the tilted critical value stays at alpha(0).
  SpaceTimeGrid<1> fine;
  fine.nx = 128;
  fine.nt = 32;
  fine.nv = 129;
  const DynamicProgram<1> fdp(LagrangianSystem<1>::pendulum().tilted(Vec<1>{c}), fine);
  EXPECT_NEAR(critical_value_vi(fdp).alpha, 0.0, 5e-2);
}

TEST(AlphaTwoDimensional, FlatTiltAlongBothAxes) {
  SpaceTimeGrid<2> g;
  g.nx = 16;
  g.nt = 8;
  g.nv = 9;
  g.v_max = 2.0;
  const AlphaExplorer<2> ex(LagrangianSystem<2>::free_particle(), g, with_lp(false));
  EXPECT_NEAR(ex.eval(Vec<2>{0.5, -0.5}).alpha_vi, 0.25, 1e-9);
}

}  // namespace
}  // namespace wkam
