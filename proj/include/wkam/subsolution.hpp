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
 * @file subsolution.hpp
 * @brief Discrete critical subsolutions: defect fields, mollified weak KAM
 * certificates, the perturbation W vanishing on the Aubry set, and the check
 * that L - W keeps the critical value and the Aubry set.
 *
 * The defect of u at level c is the control-form upwind residual
 *
 *   D(y,k) = max_j [ (u(y,k+1) - u(y - d_j,k)) / dt - L(y, v_j, t_k) ] - c,
 *
 * i.e. the discrete H(x, du) evaluated through the grid Legendre transform.
 * A backward fixed point of the DP at drift c has D <= 0 with equality along
 * calibrated steps, and D_L = D_{L-W} - W node by node.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wkam/laxoleinik.hpp"

namespace wkam {

/// Defect of u at `level`:
///   D(y,k) = max_j [(u(y,k+1) - u(y - d_j,k)) / dt - L(y, v_j, t_k)] - level,
/// indexed by the node (y,k) whose integrand enters the step.
template <int D>
ValueField<D> defect_field(const DynamicProgram<D>& dp, const ValueField<D>& u, double level) {
  const auto& g = dp.grid();
  const int S = g.space_nodes();
  const int nc = static_cast<int>(dp.candidates().size());
  const double inv = 1.0 / g.dt();
  ValueField<D> out(g);
  for (int k = 0; k < g.nt; ++k) {
    const int kn = (k + 1) % g.nt;
    parallel_for(static_cast<std::size_t>(S), [&](std::size_t b, std::size_t e) {
      for (std::size_t yy = b; yy < e; ++yy) {
        const int y = static_cast<int>(yy);
        double worst = -kInf;
        for (int j = 0; j < nc; ++j)
          worst = std::max(worst, (u.at(y, kn) - u.at(dp.source(y, j), k) - dp.step_cost(y, j, k)) * inv);
        out.at(y, k) = worst - level;
      }
    });
  }
  return out;
}

/// Periodic Gaussian smoothing in x of every time slice, truncated at 4 sigma.
/// sigma <= 0 returns u unchanged.
template <int D>
ValueField<D> mollify(const ValueField<D>& u, double sigma) {
  if (sigma <= 0.0) return u;
  const auto& g = u.grid();
  const int R = std::max(1, static_cast<int>(std::floor(4.0 * sigma * g.nx + 1e-9)));
  std::vector<double> w(static_cast<std::size_t>(2 * R + 1));
  double total = 0.0;
  for (int j = -R; j <= R; ++j) {
    const double z = j * g.dx() / sigma;
    w[static_cast<std::size_t>(j + R)] = std::exp(-0.5 * z * z);
    total += w[static_cast<std::size_t>(j + R)];
  }
  for (double& v : w) v /= total;
  ValueField<D> cur = u, next(g);
  for (int axis = 0; axis < D; ++axis) {
    for (int k = 0; k < g.nt; ++k)
      for (int s = 0; s < g.space_nodes(); ++s) {
        IVec<D> c = g.space_coords(s);
        const int c0 = c[axis];
        double acc = 0.0;
        for (int j = -R; j <= R; ++j) {
          c[axis] = c0 + j;
          acc += w[static_cast<std::size_t>(j + R)] * cur.at(g.space_index(c), k);
        }
        next.at(s, k) = acc;
      }
    std::swap(cur, next);
  }
  return cur;
}

template <int D>
struct SubsolutionCertificate {
  ValueField<D> u;
  double level = 0.0;
  ValueField<D> defect;
  ValueField<D> strictness;
  double sigma = 0.0;
  double max_defect = 0.0;
  /// min over nodes outside the dilated Aubry set of strictness - W/2
  /// (+inf when no such node or no W was supplied).
  double strictness_margin = kInf;
  bool defect_ok = false;
  bool strictness_ok = true;
  bool passed() const { return defect_ok && strictness_ok; }
};

/// Certificate for u at `level`: defect, strictness = -defect and the gate
/// defect <= tol_sub at every node.
template <int D>
SubsolutionCertificate<D> certify(const DynamicProgram<D>& dp, const ValueField<D>& u,
                                  double level, double tol_sub) {
  SubsolutionCertificate<D> c{u, level, defect_field(dp, u, level), ValueField<D>(dp.grid())};
  c.max_defect = -kInf;
  for (int i = 0; i < dp.grid().nodes(); ++i) {
    c.strictness[i] = -c.defect[i];
    c.max_defect = std::max(c.max_defect, c.defect[i]);
  }
  c.defect_ok = c.max_defect <= tol_sub;
  return c;
}

/// Mollifies u_minus of the perturbed system L - W and certifies it for the
/// original system at `level`. Requires strictness >= W/2 - tol_sub outside
/// `dilated_aubry`. Throws MollificationTooCoarse when the defect gate fails.
template <int D>
SubsolutionCertificate<D> subsolution_from_weak_kam(const DynamicProgram<D>& dp,
                                                    const ValueField<D>& u_minus_perturbed,
                                                    const ValueField<D>& W,
                                                    const NodeSet& dilated_aubry, double level,
                                                    double sigma, double tol_sub) {
  auto cert = certify(dp, mollify(u_minus_perturbed, sigma), level, tol_sub);
  cert.sigma = sigma;
  if (!cert.defect_ok)
    throw MollificationTooCoarse("sigma = " + std::to_string(sigma) + " gives defect " +
                                 std::to_string(cert.max_defect) + " > tol_sub");
  for (int i = 0; i < dp.grid().nodes(); ++i)
    if (!contains(dilated_aubry, i))
      cert.strictness_margin = std::min(cert.strictness_margin, cert.strictness[i] - 0.5 * W[i]);
  cert.strictness_ok = cert.strictness_margin >= -tol_sub;
  return cert;
}

/// Retries with halved sigma (at most `halvings` times) on MollificationTooCoarse;
/// the last attempt uses sigma = 0 (no smoothing).
template <int D>
SubsolutionCertificate<D> subsolution_with_retry(const DynamicProgram<D>& dp,
                                                 const ValueField<D>& u_minus_perturbed,
                                                 const ValueField<D>& W,
                                                 const NodeSet& dilated_aubry, double level,
                                                 double sigma, double tol_sub, int halvings = 3,
                                                 int* attempts = nullptr) {
  for (int a = 0;; ++a) {
    if (attempts) *attempts = a + 1;
    const double s = a <= halvings ? sigma * std::ldexp(1.0, -a) : 0.0;
    try {
      return subsolution_from_weak_kam(dp, u_minus_perturbed, W, dilated_aubry, level, s, tol_sub);
    } catch (const MollificationTooCoarse&) {
      if (s == 0.0) throw;
    }
  }
}

/// Node-wise best strictness over a library of certificates.
template <int D>
ValueField<D> best_strictness(const std::vector<const SubsolutionCertificate<D>*>& library) {
  if (library.empty()) throw ConfigError("library", "empty certificate library");
  ValueField<D> best = library.front()->strictness;
  for (const auto* c : library)
    for (int i = 0; i < best.grid().nodes(); ++i) best[i] = std::max(best[i], c->strictness[i]);
  return best;
}

// ---------------------------------------------------------------------------
// The perturbation W
// ---------------------------------------------------------------------------

template <int D>
struct Perturbation {
  ValueField<D> W;
  double cap = 0.0;
  double radius = 0.0;
};

inline double smoothstep(double r) {
  r = std::clamp(r, 0.0, 1.0);
  return r * r * (3.0 - 2.0 * r);
}

/// W = min(cap * s(dist / radius)^2, chi) with cap the smallest positive chi
/// value and radius at least `min_cells` cells and beyond every chi-zero node
/// outside the Aubry set, so W = cap wherever dist >= radius.
template <int D>
Perturbation<D> build_perturbation(const SpaceTimeGrid<D>& g, const NodeSet& aubry,
                                   const ValueField<D>& chi, int min_cells = 2) {
  if (aubry.empty()) throw EmptyAubry("perturbation needs a non-empty Aubry estimate");
  Perturbation<D> p{ValueField<D>(g, 0.0), 0.0, min_cells * g.dx()};
  double floor = kInf;
  for (int i = 0; i < g.nodes(); ++i)
    if (chi[i] > 0.0) floor = std::min(floor, chi[i]);
  if (!std::isfinite(floor)) return p;  // chi == 0: W == 0
  p.cap = floor;
  const std::vector<double> dist = distance_to_set(g, aubry);
  for (int i = 0; i < g.nodes(); ++i)
    if (chi[i] == 0.0 && dist[static_cast<std::size_t>(i)] > 0.0)
      p.radius = std::max(p.radius, dist[static_cast<std::size_t>(i)] + 0.5 * g.dx());
  for (int i = 0; i < g.nodes(); ++i) {
    const double s = smoothstep(dist[static_cast<std::size_t>(i)] / p.radius);
    p.W[i] = std::min(p.cap * s * s, chi[i]);
  }
  return p;
}

/// Uncapped profile amplitude * s(dist / radius)^2 (no chi cap); used to show
/// what goes wrong when W is not bounded by chi.
template <int D>
ValueField<D> uncapped_profile(const SpaceTimeGrid<D>& g, const NodeSet& aubry, double radius,
                               double amplitude) {
  ValueField<D> W(g, 0.0);
  const std::vector<double> dist = distance_to_set(g, aubry);
  for (int i = 0; i < g.nodes(); ++i) {
    const double s = smoothstep(dist[static_cast<std::size_t>(i)] / radius);
    W[i] = amplitude * s * s;
  }
  return W;
}

struct PerturbedRun {
  double scale = 1.0;
  double alpha = 0.0;
  AubryEstimate aubry;
  bool alpha_ok = false;
  bool aubry_ok = false;
  bool passed() const { return alpha_ok && aubry_ok; }
};

struct InvarianceReport {
  double alpha = 0.0;
  std::vector<PerturbedRun> runs;  // W, then W/2
  bool passed() const {
    for (const auto& r : runs)
      if (!r.passed()) return false;
    return true;
  }
};

/// alpha and the Aubry estimate of L - scale * W compared with those of L:
/// |alpha difference| <= tol_cross and each Aubry estimate inside the other
/// dilated by `cells`.
template <int D>
PerturbedRun perturbed_run(const DynamicProgram<D>& dp, const ValueField<D>& W, double scale,
                           double alpha, const AubryEstimate& aubry, const BarrierWindow& win,
                           const ViOptions& vi, double tol_cross, int cells = 2) {
  const DynamicProgram<D> pdp(dp.system().minus_field(W, scale), dp.grid());
  PerturbedRun r;
  r.scale = scale;
  r.alpha = critical_value_vi(pdp, vi).alpha;
  r.alpha_ok = std::abs(r.alpha - alpha) <= tol_cross;
  try {
    r.aubry = aubry_from_diagonal(dp.grid(), diagonal_barrier(pdp, r.alpha, win), aubry.eps);
  } catch (const EmptyAubry&) {
    r.aubry_ok = false;
    return r;
  }
  const NodeSet a_big = dilate_spatial(dp.grid(), aubry.nodes, cells);
  const NodeSet b_big = dilate_spatial(dp.grid(), r.aubry.nodes, cells);
  r.aubry_ok = std::all_of(r.aubry.nodes.begin(), r.aubry.nodes.end(),
                           [&](int n) { return contains(a_big, n); }) &&
               std::all_of(aubry.nodes.begin(), aubry.nodes.end(),
                           [&](int n) { return contains(b_big, n); });
  return r;
}

/// Runs W and the halved W/2 against the unperturbed alpha and Aubry set.
template <int D>
InvarianceReport perturbation_invariance_check(const DynamicProgram<D>& dp, const ValueField<D>& W,
                                               double alpha, const AubryEstimate& aubry,
                                               const BarrierWindow& win, const ViOptions& vi,
                                               double tol_cross) {
  InvarianceReport rep;
  rep.alpha = alpha;
  for (double scale : {1.0, 0.5})
    rep.runs.push_back(perturbed_run(dp, W, scale, alpha, aubry, win, vi, tol_cross));
  return rep;
}

}  // namespace wkam
