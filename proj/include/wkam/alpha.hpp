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
 * @file alpha.hpp
 * @brief The alpha function over cohomology: two-route evaluation (closed
 * measure LP and value iteration), segment face probes, the small-form
 * witness on E_0 and the corrected one-form witness on G_0.
 */

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>
#include <vector>

#include "wkam/laxoleinik.hpp"
#include "wkam/measures.hpp"
#include "wkam/verify.hpp"

namespace wkam {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct AlphaOptions {
  bool use_lp = true;
  int K = 3;
  int M_t = 2;
  SimplexOptions lp{};
  ViOptions vi{};
  double tol_cross = 1e-2;
};

template <int D>
struct AlphaSample {
  Vec<D> c{};
  double tau = 0.0;
  double alpha_lp = kNaN;  // NaN when the LP route is disabled
  double alpha_vi = 0.0;
  std::vector<int> minimizer_support;  // LP variable indices
  double duality_gap = 0.0;
  bool consistent = true;

  /// Value used when a single number is needed: VI (always available).
  double value() const { return alpha_vi; }
};

/// Evaluates alpha on one system and grid by both routes.
template <int D>
class AlphaExplorer {
 public:
  AlphaExplorer(LagrangianSystem<D> sys, SpaceTimeGrid<D> grid, AlphaOptions opt = {})
      : sys_(std::move(sys)), grid_(grid), opt_(opt) {}

  const LagrangianSystem<D>& system() const { return sys_; }
  const SpaceTimeGrid<D>& grid() const { return grid_; }
  const AlphaOptions& options() const { return opt_; }

  /// alpha([omega]) for a closed form omega: LP on the objective L - omega,
  /// VI on L - omega (whose critical value is alpha([omega]) + tau).
  AlphaSample<D> eval_form(const OneForm<D>& omega) const {
    AlphaSample<D> s;
    const auto [c, tau] = omega.cohomology();
    s.c = c;
    s.tau = tau;
    const DynamicProgram<D> dp(sys_.minus_form(omega), grid_);
    s.alpha_vi = critical_value_vi(dp, opt_.vi).alpha - tau;
    if (opt_.use_lp) {
      const auto res = solve_lp(build_lp(sys_, grid_, omega, TestFunctionBasis<D>{opt_.K, opt_.M_t}), opt_.lp);
      s.alpha_lp = alpha_from_lp(res, omega);
      s.minimizer_support = res.mu.support(1e-9);
      s.duality_gap = res.solution.duality_gap;
      s.consistent = std::abs(s.alpha_lp - s.alpha_vi) <= opt_.tol_cross;
    }
    return s;
  }

  /// alpha(c) with the representative c.dx (tau = 0).
  AlphaSample<D> eval(const Vec<D>& c) const { return eval_form(OneForm<D>::constant(c)); }

 private:
  LagrangianSystem<D> sys_;
  SpaceTimeGrid<D> grid_;
  AlphaOptions opt_;
};

template <int D>
AlphaSample<D> alpha_eval(const AlphaExplorer<D>& ex, const std::type_identity_t<Vec<D>>& c) {
  return ex.eval(c);
}

// ---------------------------------------------------------------------------
// Face probes
// ---------------------------------------------------------------------------

template <int D>
struct FaceRow {
  double delta = 0.0;
  AlphaSample<D> plus;   // alpha(delta e)
  AlphaSample<D> minus;  // alpha(-delta e)
  double symmetric_vi = 0.0;  // alpha(de) + alpha(-de) - 2 alpha(0), VI route
  double symmetric_lp = kNaN;
  bool certified = false;
};

template <int D>
struct FaceProbe {
  Vec<D> direction{};
  std::vector<FaceRow<D>> rows;  // sorted by delta
  double delta_star = 0.0;
  double slope_tau = 0.0;
  bool slope_consistent = true;
};

template <int D>
struct FaceReport {
  Vec<D> center{};
  AlphaSample<D> at_center;
  std::vector<FaceProbe<D>> directions;
  int vect_dim = 0;
};

/// Segment probe along unit e: delta is certified when both routes give
/// |alpha(de) + alpha(-de) - 2 alpha(0)| <= tol_face. delta_star is the largest
/// delta with every smaller probed delta certified; the slope
/// tau = -(alpha(de) - alpha(-de)) / (2 delta) is read off at delta_star (VI).
template <int D>
FaceProbe<D> face_probe(const AlphaExplorer<D>& ex, const AlphaSample<D>& center,
                        const std::type_identity_t<Vec<D>>& e, std::vector<double> deltas,
                        double tol_face) {
  std::sort(deltas.begin(), deltas.end());
  FaceProbe<D> fp;
  fp.direction = e;
  bool chain = true;
  for (double d : deltas) {
    FaceRow<D> row;
    row.delta = d;
    Vec<D> cp = center.c, cm = center.c;
    for (int i = 0; i < D; ++i) {
      cp[i] += d * e[i];
      cm[i] -= d * e[i];
    }
    row.plus = ex.eval(cp);
    row.minus = ex.eval(cm);
    row.symmetric_vi = row.plus.alpha_vi + row.minus.alpha_vi - 2.0 * center.alpha_vi;
    row.certified = std::abs(row.symmetric_vi) <= tol_face;
    if (ex.options().use_lp) {
      row.symmetric_lp = row.plus.alpha_lp + row.minus.alpha_lp - 2.0 * center.alpha_lp;
      row.certified = row.certified && std::abs(row.symmetric_lp) <= tol_face;
    }
    chain = chain && row.certified;
    if (chain) fp.delta_star = d;
    fp.rows.push_back(row);
  }
  for (const auto& row : fp.rows)
    if (row.delta == fp.delta_star && fp.delta_star > 0.0)
      fp.slope_tau = -(row.plus.alpha_vi - row.minus.alpha_vi) / (2.0 * row.delta);
  for (const auto& row : fp.rows) {
    if (row.delta > fp.delta_star) break;
    fp.slope_consistent = fp.slope_consistent &&
                          std::abs(row.plus.alpha_vi - center.alpha_vi + fp.slope_tau * row.delta) <= tol_face &&
                          std::abs(row.minus.alpha_vi - center.alpha_vi - fp.slope_tau * row.delta) <= tol_face;
  }
  return fp;
}

/// Unit directions: +e_1 in d = 1, `count` equally spaced angles in d = 2.
template <int D>
std::vector<Vec<D>> direction_fan(int count = 16) {
  std::vector<Vec<D>> out;
  if constexpr (D == 1) {
    out.push_back(Vec<D>{1.0});
  } else {
    for (int j = 0; j < count; ++j) {
      const double th = kTwoPi * j / count;
      out.push_back(Vec<D>{std::cos(th), std::sin(th)});
    }
  }
  return out;
}

/// Probes every direction of the fan around `center`; vect_dim is the rank of
/// the certified directions.
template <int D>
FaceReport<D> face_scan(const AlphaExplorer<D>& ex, const std::type_identity_t<Vec<D>>& center,
                        const std::vector<std::type_identity_t<Vec<D>>>& dirs, const std::vector<double>& deltas,
                        double tol_face) {
  FaceReport<D> rep;
  rep.center = center;
  rep.at_center = ex.eval(center);
  std::vector<Vec<D>> certified;
  for (const auto& e : dirs) {
    rep.directions.push_back(face_probe(ex, rep.at_center, e, deltas, tol_face));
    if (rep.directions.back().delta_star > 0.0) certified.push_back(e);
  }
  if (!certified.empty()) {
    Eigen::MatrixXd M(D, static_cast<Eigen::Index>(certified.size()));
    for (std::size_t j = 0; j < certified.size(); ++j)
      for (int i = 0; i < D; ++i) M(i, static_cast<Eigen::Index>(j)) = certified[j][i];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    lu.setThreshold(1e-9);
    rep.vect_dim = static_cast<int>(lu.rank());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// E_0 witness: small forms supported away from the Aubry set
// ---------------------------------------------------------------------------

template <int D>
struct E0Report {
  int support_nodes = 0;
  double eps = 0.0;        // half the smallest u_minus - u_plus gap on the support
  int N = 1;               // N(eps) on the probe table
  double max_pairing = 0.0;  // sup over support and box of |omega.(v,1)|
  double delta = 0.0;
  Vec<D> form_class{};     // spatial class of omega
  AlphaSample<D> zero, plus, minus;  // alpha(0), alpha(delta w), alpha(-delta w)
  double symmetric_vi = 0.0;
  double symmetric_lp = kNaN;
  double slope_tau = 0.0;
  bool certified = false;
};

/// Nodes where either component of omega (minus its constant part) exceeds 1e-12.
template <int D>
NodeSet form_support(const SpaceTimeGrid<D>& g, const OneForm<D>& omega) {
  NodeSet out;
  OneForm<D> var = omega;
  var.c = Vec<D>{};
  var.tau = 0.0;
  for (int i = 0; i < g.nodes(); ++i) {
    const Vec<D> x = g.position(g.space_of(i));
    const double t = g.time(g.slice_of(i));
    if (norm<D>(var.omega_x(x, t)) > 1e-12 || std::abs(var.omega_t(x, t)) > 1e-12) out.push_back(i);
  }
  return out;
}

/// Computes delta = eps / (N(eps) * max |omega.(v,1)|) on the support of the
/// non-constant part of omega, with eps half the smallest weak KAM gap there,
/// then certifies that alpha is affine on [-delta [omega], delta [omega]].
/// Throws SupportOverlap when the support meets the Aubry set dilated by one cell.
template <int D>
E0Report<D> e0_witness_test(const AlphaExplorer<D>& ex, const OneForm<D>& omega,
                            const NodeSet& aubry, const WeakKamPair<D>& pair,
                            const BarrierTable& table, double tol_face) {
  const auto& g = ex.grid();
  E0Report<D> rep;
  rep.zero = ex.eval(Vec<D>{});
  if (omega.is_zero()) {
    rep.plus = rep.minus = rep.zero;
    rep.certified = true;
    return rep;
  }
  const NodeSet support = form_support(g, omega);
  rep.support_nodes = static_cast<int>(support.size());
  const NodeSet near = dilate_spatial(g, aubry, 1);
  for (int n : support)
    if (contains(near, n))
      throw SupportOverlap("form support meets the Aubry estimate at node " + std::to_string(n));
  double gap = kInf;
  for (int n : support) {
    gap = std::min(gap, pair.u_minus[n] - pair.u_plus[n]);
    const Vec<D> x = g.position(g.space_of(n));
    const double t = g.time(g.slice_of(n));
    rep.max_pairing = std::max(rep.max_pairing, norm<D>(omega.omega_x(x, t)) * g.v_max +
                                                    std::abs(omega.omega_t(x, t)));
  }
  rep.eps = 0.5 * gap;
  rep.N = n_epsilon(table, rep.eps);
  rep.delta = rep.max_pairing > 0.0 ? rep.eps / (rep.N * rep.max_pairing) : 0.0;
  rep.form_class = omega.cohomology().first;
  rep.plus = ex.eval_form(omega.scaled(rep.delta));
  rep.minus = ex.eval_form(omega.scaled(-rep.delta));
  rep.symmetric_vi = rep.plus.alpha_vi + rep.minus.alpha_vi - 2.0 * rep.zero.alpha_vi;
  rep.certified = rep.delta > 0.0 && std::abs(rep.symmetric_vi) <= tol_face;
  if (ex.options().use_lp) {
    rep.symmetric_lp = rep.plus.alpha_lp + rep.minus.alpha_lp - 2.0 * rep.zero.alpha_lp;
    rep.certified = rep.certified && std::abs(rep.symmetric_lp) <= tol_face;
  }
  if (rep.delta > 0.0) rep.slope_tau = -(rep.plus.alpha_vi - rep.minus.alpha_vi) / (2.0 * rep.delta);
  return rep;
}

// ---------------------------------------------------------------------------
// G_0 witness: one-form correction by a discrete differential
// ---------------------------------------------------------------------------

/// A one-form sampled on grid nodes.
template <int D>
struct GridOneForm {
  SpaceTimeGrid<D> grid{};
  std::vector<Vec<D>> wx;
  std::vector<double> wt;

  explicit GridOneForm(const SpaceTimeGrid<D>& g = {})
      : grid(g), wx(static_cast<std::size_t>(g.nodes())), wt(static_cast<std::size_t>(g.nodes()), 0.0) {}

  static GridOneForm constant(const SpaceTimeGrid<D>& g, const Vec<D>& c, double tau) {
    GridOneForm f(g);
    std::fill(f.wx.begin(), f.wx.end(), c);
    std::fill(f.wt.begin(), f.wt.end(), tau);
    return f;
  }

  /// Centered periodic differential of a field.
  static GridOneForm differential(const ValueField<D>& u) {
    const auto& g = u.grid();
    GridOneForm f(g);
    for (int k = 0; k < g.nt; ++k)
      for (int s = 0; s < g.space_nodes(); ++s) {
        const int n = g.node(s, k);
        const IVec<D> c = g.space_coords(s);
        for (int i = 0; i < D; ++i) {
          IVec<D> p = c, m = c;
          p[i] += 1;
          m[i] -= 1;
          f.wx[static_cast<std::size_t>(n)][i] =
              (u.at(g.space_index(p), k) - u.at(g.space_index(m), k)) / (2.0 * g.dx());
        }
        f.wt[static_cast<std::size_t>(n)] =
            (u.at(s, (k + 1) % g.nt) - u.at(s, (k + g.nt - 1) % g.nt)) / (2.0 * g.dt());
      }
    return f;
  }

  GridOneForm operator-(const GridOneForm& o) const {
    GridOneForm f = *this;
    for (std::size_t n = 0; n < wx.size(); ++n) {
      for (int i = 0; i < D; ++i) f.wx[n][i] -= o.wx[n][i];
      f.wt[n] -= o.wt[n];
    }
    return f;
  }

  /// Rectangle-rule loop integrals through node 0: (spatial class, time class).
  std::pair<Vec<D>, double> cohomology() const {
    Vec<D> c{};
    for (int i = 0; i < D; ++i) {
      double acc = 0.0;
      for (int j = 0; j < grid.nx; ++j) {
        IVec<D> p{};
        p[i] = j;
        acc += wx[static_cast<std::size_t>(grid.node(grid.space_index(p), 0))][i];
      }
      c[i] = acc * grid.dx();
    }
    double tau = 0.0;
    for (int k = 0; k < grid.nt; ++k) tau += wt[static_cast<std::size_t>(grid.node(0, k))];
    return {c, tau * grid.dt()};
  }

  /// sup over the velocity box of |w.(v,1)| at a node: v_max |w_x| + |w_t|.
  double box_norm(int node) const {
    return grid.v_max * norm<D>(wx[static_cast<std::size_t>(node)]) +
           std::abs(wt[static_cast<std::size_t>(node)]);
  }
};

template <int D>
struct G0Witness {
  GridOneForm<D> corrected;
  double residual = 0.0;  // max over Aubry nodes of the box norm
  int worst_node = -1;
};

/// Forms (c, alpha0 - alpha_c) and subtracts the centered differential of
/// u0 - u1 (u0 a critical subsolution of L, u1 of L - c.dx). The residual is
/// the largest box norm of the corrected form over `aubry`.
template <int D>
G0Witness<D> g0_witness_build(const std::type_identity_t<Vec<D>>& c, double alpha0, double alpha_c,
                              const ValueField<D>& u0, const ValueField<D>& u1,
                              const NodeSet& aubry) {
  const auto& g = u0.grid();
  ValueField<D> diff(g);
  for (int i = 0; i < g.nodes(); ++i) diff[i] = u0[i] - u1[i];
  G0Witness<D> w{GridOneForm<D>::constant(g, c, alpha0 - alpha_c) - GridOneForm<D>::differential(diff)};
  for (int n : aubry) {
    const double r = w.corrected.box_norm(n);
    if (w.worst_node < 0 || r > w.residual) {
      w.residual = r;
      w.worst_node = n;
    }
  }
  return w;
}

}  // namespace wkam
