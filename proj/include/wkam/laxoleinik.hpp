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
 * @file laxoleinik.hpp
 * @brief Discrete Lax-Oleinik engine: minimal actions h_n, Peierls barrier,
 * Aubry set, weak KAM pairs and the value-iteration critical value.
 *
 * One backward step maps a slice u at time t_k to
 *
 *   u'(y) = min_j [ u(y - d_j) + dt * L(y, d_j / dt, t_k) ]
 *
 * where d_j runs over grid displacements with |d_j| <= v_max * dt (every
 * lift of y - x to R^D is a separate candidate). The integrand is evaluated
 * at the arrival node, which makes the scheme match the control-form
 * subsolution defect of subsolution.hpp exactly.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wkam/core.hpp"
#include "wkam/parallel.hpp"

namespace wkam {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Displacement candidate of one dynamic-programming step.
template <int D>
struct StepCandidate {
  IVec<D> offset{};
  Vec<D> velocity{};
  double kinetic = 0.0;  // |v|^2/2 - c.v
  bool boundary = false;  // sits on the outer ring of the velocity box
};

struct StepStats {
  int finite = 0;
  int saturated = 0;
};

template <int D>
class DynamicProgram {
 public:
  DynamicProgram(LagrangianSystem<D> sys, SpaceTimeGrid<D> grid)
      : sys_(std::move(sys)), grid_(grid) {
    grid_.validate();
    const double reach = grid_.v_max * grid_.dt();
    const int J = static_cast<int>(std::floor(reach * grid_.nx + 1e-9));
    const double unit = grid_.dx() / grid_.dt();
    IVec<D> off{};
    enumerate(off, 0, J, [&](const IVec<D>& o) {
      Vec<D> v{};
      for (int i = 0; i < D; ++i) v[i] = o[i] * unit;
      const double speed = norm<D>(v);
      if (speed > grid_.v_max * (1.0 + 1e-12)) return;
      cands_.push_back({o, v, sys_.kinetic(v), speed + unit > grid_.v_max * (1.0 + 1e-12)});
    });
    const int S = grid_.space_nodes();
    const auto nc = cands_.size();
    src_.resize(static_cast<std::size_t>(S) * nc);
    dst_.resize(static_cast<std::size_t>(S) * nc);
    for (int y = 0; y < S; ++y) {
      const IVec<D> cy = grid_.space_coords(y);
      for (std::size_t j = 0; j < nc; ++j) {
        IVec<D> a{}, b{};
        for (int i = 0; i < D; ++i) {
          a[i] = cy[i] - cands_[j].offset[i];
          b[i] = cy[i] + cands_[j].offset[i];
        }
        src_[static_cast<std::size_t>(y) * nc + j] = grid_.space_index(a);
        dst_[static_cast<std::size_t>(y) * nc + j] = grid_.space_index(b);
      }
    }
    separable_ = sys_.form().is_constant();
    const double tau = sys_.form().tau;
    node_cost_.resize(static_cast<std::size_t>(grid_.nodes()));
    for (int k = 0; k < grid_.nt; ++k)
      for (int s = 0; s < S; ++s)
        node_cost_[static_cast<std::size_t>(grid_.node(s, k))] =
            grid_.dt() * (sys_.shift() - sys_.U_node(grid_, s, k) - (separable_ ? tau : 0.0));
    if (!separable_) {
      // (x,t)-dependent closed-form term: one entry per (node, candidate).
      form_cost_.resize(static_cast<std::size_t>(grid_.nodes()) * nc);
      for (int k = 0; k < grid_.nt; ++k)
        for (int s = 0; s < S; ++s)
          for (std::size_t j = 0; j < nc; ++j)
            form_cost_[static_cast<std::size_t>(grid_.node(s, k)) * nc + j] =
                -grid_.dt() * sys_.form_remainder(grid_.position(s), cands_[j].velocity, grid_.time(k));
    }
    kin_cost_.resize(nc);
    for (std::size_t j = 0; j < nc; ++j) kin_cost_[j] = grid_.dt() * cands_[j].kinetic;
  }

  const LagrangianSystem<D>& system() const { return sys_; }
  const SpaceTimeGrid<D>& grid() const { return grid_; }
  const std::vector<StepCandidate<D>>& candidates() const { return cands_; }

  /// dt * L(y, v_j, t_k).
  double step_cost(int y, int j, int k) const {
    const auto node = static_cast<std::size_t>(grid_.node(y, k));
    double c = kin_cost_[static_cast<std::size_t>(j)] + node_cost_[node];
    if (!separable_) c += form_cost_[node * cands_.size() + static_cast<std::size_t>(j)];
    return c;
  }
  /// Grid node x = y - d_j.
  int source(int y, int j) const {
    return src_[static_cast<std::size_t>(y) * cands_.size() + static_cast<std::size_t>(j)];
  }
  /// Grid node y = x + d_j.
  int target(int x, int j) const {
    return dst_[static_cast<std::size_t>(x) * cands_.size() + static_cast<std::size_t>(j)];
  }

  /// Backward Lax-Oleinik step from slice k to slice k+1. Ties resolve to
  /// the smallest source index. `argmin` (optional) receives candidate ids.
  StepStats backward(std::span<const double> in, std::span<double> out, int k,
                     std::span<int> argmin = {}) const {
    const int S = grid_.space_nodes();
    const int nc = static_cast<int>(cands_.size());
    std::vector<StepStats> partial(static_cast<std::size_t>(S));
    parallel_for(static_cast<std::size_t>(S), [&](std::size_t b, std::size_t e) {
      for (std::size_t yy = b; yy < e; ++yy) {
        const int y = static_cast<int>(yy);
        const int* src = &src_[yy * static_cast<std::size_t>(nc)];
        const double* extra =
            separable_ ? nullptr
                       : &form_cost_[static_cast<std::size_t>(grid_.node(y, k)) * static_cast<std::size_t>(nc)];
        double best = kInf;
        int arg = -1;
        for (int j = 0; j < nc; ++j) {
          double val = in[static_cast<std::size_t>(src[j])] + kin_cost_[static_cast<std::size_t>(j)];
          if (extra) val += extra[j];
          if (val < best || (val == best && arg >= 0 && src[j] < src[arg])) {
            best = val;
            arg = j;
          }
        }
        const double res = best + node_cost_[static_cast<std::size_t>(grid_.node(y, k))];
        out[yy] = res;
        if (!argmin.empty()) argmin[yy] = arg;
        if (arg >= 0 && std::isfinite(res)) {
          partial[yy].finite = 1;
          partial[yy].saturated = cands_[static_cast<std::size_t>(arg)].boundary ? 1 : 0;
        }
      }
    });
    return collect(partial, k, "backward");
  }

  /// Forward (adjoint) step: slice k+1 values `in_next` to slice k,
  /// out(x) = max_j [ in_next(x + d_j) - dt * L(x + d_j, v_j, t_k) ].
  StepStats forward(std::span<const double> in_next, std::span<double> out, int k) const {
    const int S = grid_.space_nodes();
    const int nc = static_cast<int>(cands_.size());
    std::vector<StepStats> partial(static_cast<std::size_t>(S));
    parallel_for(static_cast<std::size_t>(S), [&](std::size_t b, std::size_t e) {
      for (std::size_t xx = b; xx < e; ++xx) {
        const int* dst = &dst_[xx * static_cast<std::size_t>(nc)];
        double best = -kInf;
        int arg = -1;
        for (int j = 0; j < nc; ++j) {
          const double val = in_next[static_cast<std::size_t>(dst[j])] - step_cost(dst[j], j, k);
          if (val > best || (val == best && arg >= 0 && dst[j] < dst[arg])) {
            best = val;
            arg = j;
          }
        }
        out[xx] = best;
        if (arg >= 0 && std::isfinite(best)) {
          partial[xx].finite = 1;
          partial[xx].saturated = cands_[static_cast<std::size_t>(arg)].boundary ? 1 : 0;
        }
      }
    });
    return collect(partial, k, "forward");
  }

  /// Full-period backward operator starting at slice 0, with `shift` added per step.
  void backward_period(std::span<const double> in, std::span<double> out,
                       double shift = 0.0) const {
    std::vector<double> a(in.begin(), in.end()), b(in.size());
    for (int k = 0; k < grid_.nt; ++k) {
      backward(a, b, k);
      for (double& v : b) v += shift;
      std::swap(a, b);
    }
    std::copy(a.begin(), a.end(), out.begin());
  }

 private:
  template <class Fn>
  static void enumerate(IVec<D>& off, int axis, int J, Fn&& fn) {
    if (axis == D) {
      fn(off);
      return;
    }
    for (int j = -J; j <= J; ++j) {
      off[axis] = j;
      enumerate(off, axis + 1, J, fn);
    }
  }

  static StepStats collect(const std::vector<StepStats>& partial, int k, const char* dir) {
    StepStats st;
    for (const auto& p : partial) {
      st.finite += p.finite;
      st.saturated += p.saturated;
    }
    if (st.finite > 0 && st.saturated == st.finite)
      throw BoxSaturation(std::string(dir) + " step at slice " + std::to_string(k) +
                          ": every minimizer sits on the velocity-box boundary");
    return st;
  }

  LagrangianSystem<D> sys_;
  SpaceTimeGrid<D> grid_;
  std::vector<StepCandidate<D>> cands_;
  std::vector<int> src_, dst_;
  std::vector<double> node_cost_, kin_cost_, form_cost_;
  bool separable_ = true;
};

// ---------------------------------------------------------------------------
// Critical value by value iteration
// ---------------------------------------------------------------------------

struct ViOptions {
  double tol_alpha = 1e-9;
  int max_iters = 4096;
};

struct CriticalValue {
  double alpha = 0.0;
  double lower = 0.0;  // bracket on -alpha (the per-period drift)
  double upper = 0.0;
  int periods = 0;
};

namespace detail {

// Iterates the period operator from u = 0. The drift lambda of a monotone,
// constant-commuting operator obeys min(Tu - u) <= lambda <= max(Tu - u) and
// min(T^n u - u)/n <= lambda <= max(T^n u - u)/n; both brackets are tracked.
// With `eigenvector` set, only the per-period bracket may certify convergence
// so that the final slice is a fixed point up to the drift.
template <int D>
CriticalValue run_value_iteration(const DynamicProgram<D>& dp, const ViOptions& opt,
                                  bool eigenvector, std::vector<double>* final_slice) {
  const int S = dp.grid().space_nodes();
  std::vector<double> u(static_cast<std::size_t>(S), 0.0), w(u.size());
  double offset = 0.0;
  CriticalValue cv;
  for (int n = 1; n <= opt.max_iters; ++n) {
    dp.backward_period(u, w);
    double lo_p = kInf, hi_p = -kInf, wmin = kInf, wmax = -kInf;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double d = w[i] - u[i];
      lo_p = std::min(lo_p, d);
      hi_p = std::max(hi_p, d);
      wmin = std::min(wmin, w[i]);
      wmax = std::max(wmax, w[i]);
    }
    const double lo_c = (wmin + offset) / n;
    const double hi_c = (wmax + offset) / n;
    for (double& v : w) v -= wmin;
    offset += wmin;
    std::swap(u, w);
    const double lo = eigenvector ? lo_p : std::max(lo_p, lo_c);
    const double hi = eigenvector ? hi_p : std::min(hi_p, hi_c);
    cv = {-(0.5 * (lo + hi)), lo, hi, n};
    if (hi - lo <= opt.tol_alpha) {
      if (final_slice) *final_slice = u;
      return cv;
    }
  }
  throw NotConverged("value iteration: drift bracket [" + std::to_string(cv.lower) + ", " +
                     std::to_string(cv.upper) + "] still wider than tol_alpha after " +
                     std::to_string(opt.max_iters) + " periods");
}

}  // namespace detail

/// Critical value alpha(0) as minus the per-period drift of the backward operator.
template <int D>
CriticalValue critical_value_vi(const DynamicProgram<D>& dp, const ViOptions& opt = {}) {
  return detail::run_value_iteration(dp, opt, false, nullptr);
}

// ---------------------------------------------------------------------------
// Weak KAM pairs
// ---------------------------------------------------------------------------

template <int D>
struct WeakKamPair {
  ValueField<D> u_plus;
  ValueField<D> u_minus;
  double alpha = 0.0;
  int periods = 0;
  double closure_residual = 0.0;  // sup |T u_minus - u_minus| over one period
};

/// Backward fixed point u_minus (value iteration from 0) and its conjugate
/// u_plus (forward iteration started at u_minus, so u_plus <= u_minus).
/// u_plus is shifted so that min over `aubry` (all nodes when empty) of
/// u_minus - u_plus is zero.
template <int D>
WeakKamPair<D> weak_kam_pair(const DynamicProgram<D>& dp, const ViOptions& opt = {},
                             const NodeSet& aubry = {}) {
  const auto& g = dp.grid();
  const int S = g.space_nodes();
  std::vector<double> base;
  const CriticalValue cv = detail::run_value_iteration(dp, opt, true, &base);
  const double shift = cv.alpha * g.dt();

  WeakKamPair<D> pair{ValueField<D>(g), ValueField<D>(g), cv.alpha, cv.periods, 0.0};
  std::copy(base.begin(), base.end(), pair.u_minus.slice(0).begin());
  std::vector<double> next(static_cast<std::size_t>(S));
  for (int k = 0; k < g.nt; ++k) {
    dp.backward(pair.u_minus.slice(k), next, k);
    for (double& v : next) v += shift;
    if (k + 1 < g.nt) {
      std::copy(next.begin(), next.end(), pair.u_minus.slice(k + 1).begin());
    } else {
      for (int s = 0; s < S; ++s)
        pair.closure_residual =
            std::max(pair.closure_residual, std::abs(next[static_cast<std::size_t>(s)] -
                                                     pair.u_minus.at(s, 0)));
    }
  }

  std::vector<double> top(base), cur(static_cast<std::size_t>(S));
  bool converged = false;
  for (int n = 1; n <= opt.max_iters && !converged; ++n) {
    for (int k = g.nt - 1; k >= 0; --k) {
      std::span<const double> src = k + 1 < g.nt ? pair.u_plus.slice(k + 1) : std::span<const double>(top);
      dp.forward(src, cur, k);
      for (double& v : cur) v -= shift;
      std::copy(cur.begin(), cur.end(), pair.u_plus.slice(k).begin());
    }
    double change = 0.0;
    for (int s = 0; s < S; ++s)
      change = std::max(change, std::abs(pair.u_plus.at(s, 0) - top[static_cast<std::size_t>(s)]));
    std::copy(pair.u_plus.slice(0).begin(), pair.u_plus.slice(0).end(), top.begin());
    converged = change <= opt.tol_alpha;
  }
  if (!converged) throw NotConverged("forward weak KAM iteration did not settle");

  double gap = kInf;
  if (aubry.empty()) {
    for (int i = 0; i < g.nodes(); ++i) gap = std::min(gap, pair.u_minus[i] - pair.u_plus[i]);
  } else {
    for (int i : aubry) gap = std::min(gap, pair.u_minus[i] - pair.u_plus[i]);
  }
  for (double& v : pair.u_plus.data()) v += gap;
  return pair;
}

/// Largest violation of u(y,t+dt) - u(x,t) <= dt*(L + alpha) over feasible pairs.
template <int D>
double domination_violation(const DynamicProgram<D>& dp, const ValueField<D>& u, double alpha) {
  const auto& g = dp.grid();
  const int S = g.space_nodes();
  const int nc = static_cast<int>(dp.candidates().size());
  double worst = -kInf;
  for (int k = 0; k < g.nt; ++k) {
    const int kn = (k + 1) % g.nt;
    for (int y = 0; y < S; ++y)
      for (int j = 0; j < nc; ++j) {
        const int x = dp.source(y, j);
        worst = std::max(worst, u.at(y, kn) - u.at(x, k) - dp.step_cost(y, j, k) - alpha * g.dt());
      }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Minimal actions and the Peierls barrier
// ---------------------------------------------------------------------------

struct BarrierWindow {
  int n_lo = 8;
  int n_hi = 64;
  double tol_h = 1e-2;
};

/// h_n(src, .) for n = 1..n_hi from one source node.
template <int D>
class BarrierSweep {
 public:
  BarrierSweep(const DynamicProgram<D>& dp, int src, int n_hi, double alpha)
      : nodes_(dp.grid().nodes()), n_hi_(n_hi), src_(src),
        values_(static_cast<std::size_t>(nodes_) * static_cast<std::size_t>(n_hi), kInf) {
    const auto& g = dp.grid();
    const int S = g.space_nodes();
    std::vector<double> cur(static_cast<std::size_t>(S), kInf), next(cur.size());
    cur[static_cast<std::size_t>(g.space_of(src))] = 0.0;
    const int t0 = g.slice_of(src);
    int k = t0;
    const int steps = (n_hi + 1) * g.nt - t0 - 1;
    for (int m = 1; m <= steps; ++m) {
      dp.backward(cur, next, k);
      std::swap(cur, next);
      k = (k + 1) % g.nt;
      const int n = (t0 + m) / g.nt;
      if (n < 1 || n > n_hi) continue;
      double* row = &values_[static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(nodes_)];
      for (int s = 0; s < S; ++s) row[g.node(s, k)] = cur[static_cast<std::size_t>(s)] + n * alpha;
    }
  }

  int source() const { return src_; }
  int n_hi() const { return n_hi_; }
  double h_n(int n, int dst) const {
    return values_[static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(nodes_) +
                   static_cast<std::size_t>(dst)];
  }

 private:
  int nodes_;
  int n_hi_;
  int src_;
  std::vector<double> values_;
};

struct BarrierValue {
  double h = kInf;
  int n_star = 0;
  double oscillation = 0.0;   // max - min of h_n over the last quarter window
  double final_decrease = 0.0;  // running-min decrease over the last quarter window
  bool converged = true;
};

/// Window-min liminf surrogate from a tabulated sequence h_1..h_{n_hi}.
template <class Seq>
BarrierValue window_min(Seq&& h_of_n, const BarrierWindow& win) {
  if (win.n_lo < 1 || win.n_hi < 2 * win.n_lo)
    throw ConfigError("windows", "need 1 <= N_lo and N_hi >= 2 N_lo");
  BarrierValue out;
  const int tail_start = win.n_hi - win.n_hi / 4;
  double run_at_tail = kInf;
  double tail_max = -kInf, tail_min = kInf;
  for (int n = win.n_lo; n <= win.n_hi; ++n) {
    const double h = h_of_n(n);
    if (h < out.h) {
      out.h = h;
      out.n_star = n;
    }
    if (n == tail_start) run_at_tail = out.h;
    if (n >= tail_start) {
      tail_max = std::max(tail_max, h);
      tail_min = std::min(tail_min, h);
    }
  }
  out.oscillation = tail_max - tail_min;
  out.final_decrease = std::isfinite(run_at_tail) ? run_at_tail - out.h : 0.0;
  out.converged = out.final_decrease <= win.tol_h;
  return out;
}

/// Discrete minimal action from src to (dst, n periods later) plus n * alpha.
template <int D>
double finite_action(const DynamicProgram<D>& dp, int src, int dst, int n, double alpha) {
  if (n < 1) throw ConfigError("n", "horizon must be >= 1");
  const auto& g = dp.grid();
  const int S = g.space_nodes();
  const int t0 = g.slice_of(src), t1 = g.slice_of(dst);
  const int steps = n * g.nt + t1 - t0;
  std::vector<double> cur(static_cast<std::size_t>(S), kInf), next(cur.size());
  cur[static_cast<std::size_t>(g.space_of(src))] = 0.0;
  for (int m = 0; m < steps; ++m) {
    dp.backward(cur, next, (t0 + m) % g.nt);
    std::swap(cur, next);
  }
  return cur[static_cast<std::size_t>(g.space_of(dst))] + n * alpha;
}

/// Sequence of spatial nodes visited by a discrete minimizer from src to dst
/// (n periods), one entry per time step including both endpoints.
template <int D>
std::vector<int> minimizing_path(const DynamicProgram<D>& dp, int src, int dst, int n) {
  const auto& g = dp.grid();
  const int S = g.space_nodes();
  const int t0 = g.slice_of(src), t1 = g.slice_of(dst);
  const int steps = n * g.nt + t1 - t0;
  std::vector<double> cur(static_cast<std::size_t>(S), kInf), next(cur.size());
  std::vector<int> arg(static_cast<std::size_t>(S) * static_cast<std::size_t>(steps));
  cur[static_cast<std::size_t>(g.space_of(src))] = 0.0;
  for (int m = 0; m < steps; ++m) {
    dp.backward(cur, next, (t0 + m) % g.nt,
                std::span<int>(arg).subspan(static_cast<std::size_t>(m) * S, static_cast<std::size_t>(S)));
    std::swap(cur, next);
  }
  std::vector<int> path(static_cast<std::size_t>(steps) + 1);
  int y = g.space_of(dst);
  path.back() = y;
  for (int m = steps - 1; m >= 0; --m) {
    y = dp.source(y, arg[static_cast<std::size_t>(m) * S + static_cast<std::size_t>(y)]);
    path[static_cast<std::size_t>(m)] = y;
  }
  return path;
}

template <int D>
BarrierValue peierls_barrier(const DynamicProgram<D>& dp, int src, int dst, double alpha,
                             const BarrierWindow& win) {
  const BarrierSweep<D> sweep(dp, src, win.n_hi, alpha);
  BarrierValue v = window_min([&](int n) { return sweep.h_n(n, dst); }, win);
  if (!v.converged)
    throw NotConverged("Peierls barrier: running minimum still dropped by " +
                       std::to_string(v.final_decrease) + " in the final window");
  return v;
}

/// Single-threaded backward step used inside per-source parallel loops.
template <int D>
void serial_backward(const DynamicProgram<D>& dp, std::span<const double> in,
                     std::span<double> out, int k) {
  const auto& g = dp.grid();
  const int S = g.space_nodes();
  const int nc = static_cast<int>(dp.candidates().size());
  for (int y = 0; y < S; ++y) {
    double best = kInf;
    for (int j = 0; j < nc; ++j) {
      const double val = in[static_cast<std::size_t>(dp.source(y, j))] + dp.step_cost(y, j, k);
      best = std::min(best, val);
    }
    out[static_cast<std::size_t>(y)] = best;
  }
}

/// Diagonal barrier h((x,t),(x,t)) at every node.
template <int D>
std::vector<BarrierValue> diagonal_barrier(const DynamicProgram<D>& dp, double alpha,
                                           const BarrierWindow& win) {
  const auto& g = dp.grid();
  const int S = g.space_nodes();
  std::vector<BarrierValue> out(static_cast<std::size_t>(g.nodes()));
  // Sources are independent; run them in parallel with serial steps inside.
  parallel_for(static_cast<std::size_t>(g.nodes()), [&](std::size_t b, std::size_t e) {
    std::vector<double> cur(static_cast<std::size_t>(S)), next(cur.size());
    std::vector<double> seq(static_cast<std::size_t>(win.n_hi) + 1);
    for (std::size_t src = b; src < e; ++src) {
      const int s0 = g.space_of(static_cast<int>(src));
      const int t0 = g.slice_of(static_cast<int>(src));
      std::fill(cur.begin(), cur.end(), kInf);
      cur[static_cast<std::size_t>(s0)] = 0.0;
      int k = t0;
      for (int n = 1; n <= win.n_hi; ++n) {
        for (int m = 0; m < g.nt; ++m) {
          serial_backward(dp, cur, next, k);
          std::swap(cur, next);
          k = (k + 1) % g.nt;
        }
        seq[static_cast<std::size_t>(n)] = cur[static_cast<std::size_t>(s0)] + n * alpha;
      }
      out[src] = window_min([&](int n) { return seq[static_cast<std::size_t>(n)]; }, win);
    }
  }, 1);
  return out;
}

struct AubryEstimate {
  NodeSet nodes;
  std::vector<double> diagonal;  // h((x,t),(x,t)) per node
  double eps = 0.0;
  int escalations = 0;
  int unconverged = 0;  // diagonal entries that failed the window test
};

/// Lower floor for the default Aubry threshold; the flat-system error is
/// exactly zero on uniform grids.
inline constexpr double kAubryEpsFloor = 1e-6;

/// Max deviation from zero of the diagonal barrier of the free particle on
/// the same grid (translation invariant, so a single source suffices).
template <int D>
double grid_consistency_error(const SpaceTimeGrid<D>& grid, const BarrierWindow& win) {
  const DynamicProgram<D> flat(LagrangianSystem<D>::free_particle(), grid);
  double worst = 0.0;
  for (int k = 0; k < std::min(grid.nt, 2); ++k) {
    const BarrierSweep<D> sweep(flat, grid.node(0, k), win.n_hi, 0.0);
    const BarrierValue v =
        window_min([&](int n) { return sweep.h_n(n, grid.node(0, k)); }, win);
    worst = std::max(worst, std::abs(v.h));
  }
  return worst;
}

template <int D>
double default_aubry_eps(const SpaceTimeGrid<D>& grid, const BarrierWindow& win) {
  return std::max(10.0 * grid_consistency_error(grid, win), kAubryEpsFloor);
}

/// Nodes with diagonal barrier <= eps. An empty result doubles eps up to
/// three times before raising EmptyAubry.
template <int D>
AubryEstimate aubry_from_diagonal(const SpaceTimeGrid<D>& grid,
                                  const std::vector<BarrierValue>& diag, double eps) {
  AubryEstimate est;
  est.diagonal.reserve(diag.size());
  for (const auto& d : diag) {
    est.diagonal.push_back(d.h);
    if (!d.converged) ++est.unconverged;
  }
  for (int attempt = 0; attempt <= 3; ++attempt) {
    est.nodes.clear();
    for (int i = 0; i < grid.nodes(); ++i)
      if (est.diagonal[static_cast<std::size_t>(i)] <= eps) est.nodes.push_back(i);
    est.eps = eps;
    est.escalations = attempt;
    if (!est.nodes.empty()) return est;
    eps *= 2.0;
  }
  throw EmptyAubry("no node has diagonal barrier <= " + std::to_string(est.eps));
}

template <int D>
AubryEstimate aubry_set(const DynamicProgram<D>& dp, double alpha, const BarrierWindow& win,
                        std::optional<double> eps = std::nullopt) {
  const double e = eps ? *eps : default_aubry_eps(dp.grid(), win);
  return aubry_from_diagonal(dp.grid(), diagonal_barrier(dp, alpha, win), e);
}

// ---------------------------------------------------------------------------
// Node-set geometry
// ---------------------------------------------------------------------------

/// Torus distance between two space-time nodes, time weighted like space.
template <int D>
double node_distance(const SpaceTimeGrid<D>& g, int a, int b) {
  const Vec<D> xa = g.position(g.space_of(a)), xb = g.position(g.space_of(b));
  double s = 0.0;
  for (int i = 0; i < D; ++i) {
    const double d = circle_delta(xa[i], xb[i]);
    s += d * d;
  }
  const double dt = circle_delta(g.time(g.slice_of(a)), g.time(g.slice_of(b)));
  return std::sqrt(s + dt * dt);
}

/// Distance of every node to `set` (+inf when the set is empty).
template <int D>
std::vector<double> distance_to_set(const SpaceTimeGrid<D>& g, const NodeSet& set) {
  std::vector<double> d(static_cast<std::size_t>(g.nodes()), kInf);
  parallel_for(d.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      for (int a : set) d[i] = std::min(d[i], node_distance(g, static_cast<int>(i), a));
  });
  return d;
}

/// Nodes within `cells` spatial cells of `set` in the same time slice.
template <int D>
NodeSet dilate_spatial(const SpaceTimeGrid<D>& g, const NodeSet& set, int cells) {
  std::vector<char> mark(static_cast<std::size_t>(g.nodes()), 0);
  for (int a : set) {
    const int k = g.slice_of(a);
    const IVec<D> c = g.space_coords(g.space_of(a));
    IVec<D> off{};
    auto rec = [&](auto&& self, int axis) -> void {
      if (axis == D) {
        IVec<D> p{};
        for (int i = 0; i < D; ++i) p[i] = c[i] + off[i];
        mark[static_cast<std::size_t>(g.node(g.space_index(p), k))] = 1;
        return;
      }
      for (int j = -cells; j <= cells; ++j) {
        off[axis] = j;
        self(self, axis + 1);
      }
    };
    rec(rec, 0);
  }
  NodeSet out;
  for (int i = 0; i < g.nodes(); ++i)
    if (mark[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

inline bool contains(const NodeSet& sorted, int node) {
  return std::binary_search(sorted.begin(), sorted.end(), node);
}

}  // namespace wkam
