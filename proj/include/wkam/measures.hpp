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
 * @file measures.hpp
 * @brief Closed probability measures on (x, v, t) nodes and the linear
 * program  min int (L - omega) dmu  over measures closed against a
 * truncated trigonometric basis.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "wkam/core.hpp"
#include "wkam/parallel.hpp"
#include "wkam/simplex.hpp"

namespace wkam {

/// Nonnegative weights on the (x, v, t) nodes of a grid.
template <int D>
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  explicit DiscreteMeasure(const SpaceTimeGrid<D>& grid)
      : grid_(grid),
        w_(static_cast<std::size_t>(grid.space_nodes()) * grid.velocity_nodes() * grid.nt, 0.0) {}

  static DiscreteMeasure dirac(const SpaceTimeGrid<D>& grid, int s, int iv, int k) {
    DiscreteMeasure mu(grid);
    mu.weight(s, iv, k) = 1.0;
    return mu;
  }

  const SpaceTimeGrid<D>& grid() const { return grid_; }
  std::size_t size() const { return w_.size(); }

  /// Variable index of node (s, iv, k).
  int index(int s, int iv, int k) const {
    return (k * grid_.velocity_nodes() + iv) * grid_.space_nodes() + s;
  }
  int space_of(int idx) const { return idx % grid_.space_nodes(); }
  int velocity_of(int idx) const { return (idx / grid_.space_nodes()) % grid_.velocity_nodes(); }
  int slice_of(int idx) const { return idx / (grid_.space_nodes() * grid_.velocity_nodes()); }

  double& weight(int s, int iv, int k) { return w_[static_cast<std::size_t>(index(s, iv, k))]; }
  double weight(int s, int iv, int k) const { return w_[static_cast<std::size_t>(index(s, iv, k))]; }
  double& operator[](std::size_t i) { return w_[i]; }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> weights() const { return w_; }

  double mass() const {
    double s = 0.0;
    for (double w : w_) s += w;
    return s;
  }
  void normalize() {
    const double m = mass();
    if (!(m > 0.0)) throw ConfigError("measure", "zero total mass");
    for (double& w : w_) w /= m;
  }
  /// Indices with weight above `floor`.
  std::vector<int> support(double floor = 1e-12) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (w_[i] > floor) out.push_back(static_cast<int>(i));
    return out;
  }

  /// Deposits mass at a continuous (x, v, t) by multilinear splitting.
  /// Velocities are clamped to the box edge.
  void deposit(const Vec<D>& x, const Vec<D>& v, double t, double mass) {
    const auto& g = grid_;
    IVec<D> xl{}, vl{};
    Vec<D> xf{}, vf{};
    for (int i = 0; i < D; ++i) {
      const double sx = wrap_unit(x[i]) * g.nx;
      xl[i] = static_cast<int>(std::floor(sx));
      xf[i] = sx - xl[i];
      double sv = (v[i] + g.v_max) / (2.0 * g.v_max) * (g.nv - 1);
      sv = std::clamp(sv, 0.0, static_cast<double>(g.nv - 1));
      vl[i] = std::min(static_cast<int>(std::floor(sv)), g.nv - 2);
      vf[i] = sv - vl[i];
    }
    const double st = wrap_unit(t) * g.nt;
    const int tl = static_cast<int>(std::floor(st));
    const double tf = st - tl;
    for (int corner = 0; corner < (1 << (2 * D + 1)); ++corner) {
      double w = mass;
      IVec<D> xc = xl;
      int viv = 0, stride = 1;
      for (int i = 0; i < D; ++i) {
        const bool hx = corner & (1 << i);
        w *= hx ? xf[i] : 1.0 - xf[i];
        if (hx) xc[i] += 1;
        const bool hv = corner & (1 << (D + i));
        w *= hv ? vf[i] : 1.0 - vf[i];
        viv += (vl[i] + (hv ? 1 : 0)) * stride;
        stride *= g.nv;
      }
      const bool ht = corner & (1 << (2 * D));
      w *= ht ? tf : 1.0 - tf;
      if (w == 0.0) continue;
      weight(g.space_index(xc), viv, wrap_index(tl + (ht ? 1 : 0), g.nt)) += w;
    }
  }

 private:
  SpaceTimeGrid<D> grid_{};
  std::vector<double> w_;
};

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

/// cos or sin of 2 pi (k.x + m t).
template <int D>
struct TestMode {
  IVec<D> k{};
  int m = 0;
  bool sine = false;

  TrigPoly<D> function() const {
    TrigPoly<D> f;
    f.terms.push_back({k, m, sine ? 0.0 : 1.0, sine ? 1.0 : 0.0});
    return f;
  }
  std::string name() const {
    std::string s = sine ? "sin" : "cos";
    for (int i = 0; i < D; ++i) s += "_" + std::to_string(k[i]);
    return s + "_" + std::to_string(m);
  }
};

/// All (k, m) with |k|_inf <= K, |m| <= M_t, (k, m) != 0, each as a cos and
/// a sin element. Opposite modes are listed separately, so the basis has
/// 2 ((2K+1)^D (2M_t+1) - 1) elements.
template <int D>
struct TestFunctionBasis {
  int K = 3;
  int M_t = 2;

  std::vector<TestMode<D>> elements() const {
    if (K < 0 || M_t < 0) throw ConfigError("basis", "K and M_t must be >= 0");
    std::vector<TestMode<D>> out;
    IVec<D> k{};
    auto rec = [&](auto&& self, int axis) -> void {
      if (axis == D) {
        for (int m = -M_t; m <= M_t; ++m) {
          bool zero = m == 0;
          for (int i = 0; i < D; ++i) zero = zero && k[i] == 0;
          if (zero) continue;
          out.push_back({k, m, false});
          out.push_back({k, m, true});
        }
        return;
      }
      for (int j = -K; j <= K; ++j) {
        k[axis] = j;
        self(self, axis + 1);
      }
    };
    rec(rec, 0);
    return out;
  }
  int mode_count() const { return int_pow(2 * K + 1, D) * (2 * M_t + 1) - 1; }
};

/// int df.(v,1) dmu by node quadrature.
template <int D>
double closedness_defect(const DiscreteMeasure<D>& mu, const TrigPoly<D>& f) {
  const auto& g = mu.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double w = mu[i];
    if (w == 0.0) continue;
    const int idx = static_cast<int>(i);
    const Vec<D> x = g.position(mu.space_of(idx));
    const Vec<D> v = g.velocity(mu.velocity_of(idx));
    const double t = g.time(mu.slice_of(idx));
    acc += w * (dot<D>(f.grad_x(x, t), v) + f.d_t(x, t));
  }
  return acc;
}

/// Largest |closedness_defect| over a basis.
template <int D>
double max_closedness_defect(const DiscreteMeasure<D>& mu, const TestFunctionBasis<D>& basis) {
  double worst = 0.0;
  for (const auto& e : basis.elements())
    worst = std::max(worst, std::abs(closedness_defect(mu, e.function())));
  return worst;
}

// ---------------------------------------------------------------------------
// The closed-measure LP
// ---------------------------------------------------------------------------

template <int D>
struct ClosedMeasureLp {
  LinearProgram lp;
  SpaceTimeGrid<D> grid;
  std::vector<TestMode<D>> modes;
};

/// Variables are node weights; objective (L - omega.(v,1)) at the node; rows
/// are the mass constraint and closedness against every basis element.
template <int D>
ClosedMeasureLp<D> build_lp(const LagrangianSystem<D>& sys, const SpaceTimeGrid<D>& grid,
                            const OneForm<D>& omega, const TestFunctionBasis<D>& basis) {
  grid.validate();
  ClosedMeasureLp<D> out{{}, grid, basis.elements()};
  const DiscreteMeasure<D> shape(grid);
  const int n = static_cast<int>(shape.size());
  const int m = 1 + static_cast<int>(out.modes.size());
  out.lp.objective.resize(n);
  out.lp.rows.resize(m, n);
  out.lp.rhs = Eigen::VectorXd::Zero(m);
  out.lp.rhs[0] = 1.0;
  out.lp.row_names.push_back("mass");
  for (const auto& e : out.modes) out.lp.row_names.push_back(e.name());
  std::vector<TrigPoly<D>> fs;
  for (const auto& e : out.modes) fs.push_back(e.function());
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const int idx = static_cast<int>(j);
      const Vec<D> x = grid.position(shape.space_of(idx));
      const Vec<D> v = grid.velocity(shape.velocity_of(idx));
      const double t = grid.time(shape.slice_of(idx));
      out.lp.objective[idx] = sys.L(x, v, t) - omega.pair(x, v, t);
      out.lp.rows(0, idx) = 1.0;
      for (std::size_t r = 0; r < fs.size(); ++r)
        out.lp.rows(static_cast<int>(r) + 1, idx) = dot<D>(fs[r].grad_x(x, t), v) + fs[r].d_t(x, t);
    }
  }, 1024);
  return out;
}

template <int D>
struct LpResult {
  double value = 0.0;
  DiscreteMeasure<D> mu;
  LpSolution solution;
};

template <int D>
LpResult<D> solve_lp(const ClosedMeasureLp<D>& prog, const SimplexOptions& opt = {}) {
  LpResult<D> r{0.0, DiscreteMeasure<D>(prog.grid), solve_simplex(prog.lp, opt)};
  r.value = r.solution.value;
  for (int j = 0; j < prog.lp.variable_count(); ++j)
    r.mu[static_cast<std::size_t>(j)] = r.solution.x[j];
  return r;
}

/// LP estimate of alpha([omega]): -(min value) - tau.
template <int D>
double alpha_from_lp(const LpResult<D>& res, const OneForm<D>& omega) {
  return -res.value - omega.cohomology().second;
}

template <int D>
double alpha_from_lp(const LagrangianSystem<D>& sys, const SpaceTimeGrid<D>& grid,
                     const OneForm<D>& omega, const TestFunctionBasis<D>& basis,
                     const SimplexOptions& opt = {}) {
  return alpha_from_lp(solve_lp(build_lp(sys, grid, omega, basis), opt), omega);
}

/// Total variation between the (x,v)-marginal of mu and that of its image
/// under the Euler-Lagrange flow for time dt. Time is projected out so that
/// measures concentrated on single slices can still be compared with their
/// image one step later.
template <int D>
double invariance_defect(const LagrangianSystem<D>& sys, const DiscreteMeasure<D>& mu, double dt) {
  const auto& g = mu.grid();
  const double substep = g.dt() / 8.0;
  DiscreteMeasure<D> pushed(g);
  std::vector<double> before(static_cast<std::size_t>(g.space_nodes()) * g.velocity_nodes(), 0.0);
  std::vector<double> after(before.size(), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double w = mu[i];
    if (w <= 0.0) continue;
    const int idx = static_cast<int>(i);
    before[static_cast<std::size_t>(mu.velocity_of(idx) * g.space_nodes() + mu.space_of(idx))] += w;
    PhasePoint<D> p{g.position(mu.space_of(idx)), g.velocity(mu.velocity_of(idx)),
                    g.time(mu.slice_of(idx))};
    p = euler_lagrange_flow(sys, p, dt, substep, g.v_max);
    pushed.deposit(p.x, p.v, p.t, w);
  }
  for (std::size_t i = 0; i < pushed.size(); ++i) {
    const int idx = static_cast<int>(i);
    after[static_cast<std::size_t>(pushed.velocity_of(idx) * g.space_nodes() + pushed.space_of(idx))] +=
        pushed[i];
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) tv += std::abs(before[i] - after[i]);
  return 0.5 * tv;
}

/// Time-averaged occupation measure of the Euler-Lagrange orbit from `start`
/// over `periods` periods (trapezoid weights, substeps of dt/8).
template <int D>
DiscreteMeasure<D> occupation_measure(const LagrangianSystem<D>& sys, const SpaceTimeGrid<D>& grid,
                                      PhasePoint<D> start, int periods) {
  DiscreteMeasure<D> mu(grid);
  const double h = grid.dt() / 8.0;
  const int steps = periods * grid.nt * 8;
  for (int i = 0; i <= steps; ++i) {
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    mu.deposit(start.x, start.v, start.t, w / steps);
    if (i < steps) start = euler_lagrange_step(sys, start, h, grid.v_max);
  }
  return mu;
}

/// Occupation measure from a random start; draws again (same generator) when
/// the orbit leaves the velocity box.
template <int D>
DiscreteMeasure<D> random_occupation_measure(const LagrangianSystem<D>& sys,
                                             const SpaceTimeGrid<D>& grid, int periods,
                                             double speed, std::mt19937_64& rng,
                                             int max_attempts = 64) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    PhasePoint<D> p;
    for (int i = 0; i < D; ++i) {
      p.x[i] = unit(rng);
      p.v[i] = speed * (2.0 * unit(rng) - 1.0);
    }
    p.t = unit(rng);
    try {
      return occupation_measure(sys, grid, p, periods);
    } catch (const VelocityEscape&) {
    }
  }
  throw VelocityEscape("no sampled orbit stayed inside the velocity box");
}

/// Writes the program in CPLEX LP text format (objective, equality rows;
/// variables default to x >= 0).
inline void write_lp_format(std::ostream& os, const LinearProgram& lp) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto term = [&](double a, int j, bool first) {
    std::string s = a < 0 ? (first ? "-" : " - ") : (first ? "" : " + ");
    return s + num(std::abs(a)) + " x" + std::to_string(j);
  };
  os << "\\ closed-measure LP\nMinimize\n obj:";
  bool first = true;
  for (int j = 0; j < lp.variable_count(); ++j) {
    if (lp.objective[j] == 0.0) continue;
    os << ' ' << term(lp.objective[j], j, first);
    first = false;
  }
  if (first) os << " 0 x0";
  os << "\nSubject To\n";
  for (int i = 0; i < lp.row_count(); ++i) {
    os << ' ' << (i < static_cast<int>(lp.row_names.size()) ? lp.row_names[static_cast<std::size_t>(i)]
                                                           : "r" + std::to_string(i))
       << ':';
    bool f = true;
    for (int j = 0; j < lp.variable_count(); ++j) {
      if (lp.rows(i, j) == 0.0) continue;
      os << ' ' << term(lp.rows(i, j), j, f);
      f = false;
    }
    if (f) os << " 0 x0";
    os << " = " << num(lp.rhs[i]) << '\n';
  }
  os << "End\n";
}

}  // namespace wkam
