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
 * @file core.hpp
 * @brief Time-periodic Lagrangian systems on the flat torus T^D, their
 * Legendre-dual Hamiltonians, closed one-forms, and the periodic
 * space-time grid shared by every solver in the toolkit.
 *
 * The supported class is L(x,v,t) = |v|^2/2 - c.v - U(x,t) + s, with U a
 * trigonometric polynomial plus an optional grid-sampled term. It is an
 * exact Legendre pair with H(x,p,t) = |p+c|^2/2 + U(x,t) - s, and its
 * Euler-Lagrange flow is x' = v, v' = -grad U.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "wkam/errors.hpp"

namespace wkam {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <int D>
using Vec = std::array<double, D>;
template <int D>
using IVec = std::array<int, D>;

template <int D>
constexpr double dot(const Vec<D>& a, const Vec<D>& b) {
  double s = 0.0;
  for (int i = 0; i < D; ++i) s += a[i] * b[i];
  return s;
}

template <int D>
double norm(const Vec<D>& a) {
  return std::sqrt(dot<D>(a, a));
}

/// Representative of x mod 1 in [0, 1).
inline double wrap_unit(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

inline int wrap_index(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

/// Signed distance from a to b on the unit circle, in [-1/2, 1/2).
inline double circle_delta(double a, double b) {
  double d = b - a;
  d -= std::floor(d + 0.5);
  return d;
}

constexpr int int_pow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// ---------------------------------------------------------------------------
// Space-time grid
// ---------------------------------------------------------------------------

/// Uniform periodic grid on T^D x T plus a symmetric velocity box.
///
/// Space-time nodes are numbered `k * space_nodes() + s` with `k` the time
/// slice and `s` the flattened spatial index (axis 0 fastest).
template <int D>
struct SpaceTimeGrid {
  static_assert(D == 1 || D == 2, "flat tori of dimension 1 or 2 only");

  int nx = 64;
  int nt = 16;
  int nv = 65;
  double v_max = 4.0;

  double dx() const { return 1.0 / nx; }
  double dt() const { return 1.0 / nt; }
  int space_nodes() const { return int_pow(nx, D); }
  int nodes() const { return space_nodes() * nt; }
  int velocity_nodes() const { return int_pow(nv, D); }

  int node(int s, int k) const { return k * space_nodes() + s; }
  int slice_of(int node) const { return node / space_nodes(); }
  int space_of(int node) const { return node % space_nodes(); }

  IVec<D> space_coords(int s) const {
    IVec<D> c{};
    for (int i = 0; i < D; ++i) {
      c[i] = s % nx;
      s /= nx;
    }
    return c;
  }
  int space_index(const IVec<D>& c) const {
    int s = 0;
    for (int i = D - 1; i >= 0; --i) s = s * nx + wrap_index(c[i], nx);
    return s;
  }
  Vec<D> position(int s) const {
    const IVec<D> c = space_coords(s);
    Vec<D> x{};
    for (int i = 0; i < D; ++i) x[i] = static_cast<double>(c[i]) / nx;
    return x;
  }
  double time(int k) const { return static_cast<double>(k) / nt; }

  double velocity_1d(int iv) const { return -v_max + 2.0 * v_max * iv / (nv - 1); }
  IVec<D> velocity_coords(int iv) const {
    IVec<D> c{};
    for (int i = 0; i < D; ++i) {
      c[i] = iv % nv;
      iv /= nv;
    }
    return c;
  }
  Vec<D> velocity(int iv) const {
    const IVec<D> c = velocity_coords(iv);
    Vec<D> v{};
    for (int i = 0; i < D; ++i) v[i] = velocity_1d(c[i]);
    return v;
  }

  /// Throws ConfigError when a structural invariant is violated.
  void validate() const {
    if (nx < 4) throw ConfigError("grid.nx", "must be >= 4");
    if (nt < 2) throw ConfigError("grid.nt", "must be >= 2");
    if (nv < 3) throw ConfigError("grid.nv", "must be >= 3");
    if (!(v_max > 0.0)) throw ConfigError("grid.v_max", "must be positive");
    if (v_max * dt() < dx() * (1.0 - 1e-12))
      throw ConfigError("grid", "v_max * dt must cover at least one spatial cell");
  }

  bool operator==(const SpaceTimeGrid&) const = default;
};

// ---------------------------------------------------------------------------
// Grid-sampled scalar fields
// ---------------------------------------------------------------------------

/// A scalar function sampled on every space-time node of a grid.
template <int D>
class ValueField {
 public:
  ValueField() = default;
  explicit ValueField(const SpaceTimeGrid<D>& grid, double fill = 0.0)
      : grid_(grid), data_(static_cast<std::size_t>(grid.nodes()), fill) {}

  const SpaceTimeGrid<D>& grid() const { return grid_; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](int node) { return data_[static_cast<std::size_t>(node)]; }
  double operator[](int node) const { return data_[static_cast<std::size_t>(node)]; }
  double& at(int s, int k) { return data_[static_cast<std::size_t>(grid_.node(s, k))]; }
  double at(int s, int k) const { return data_[static_cast<std::size_t>(grid_.node(s, k))]; }

  std::span<double> slice(int k) {
    const auto n = static_cast<std::size_t>(grid_.space_nodes());
    return std::span<double>(data_).subspan(static_cast<std::size_t>(k) * n, n);
  }
  std::span<const double> slice(int k) const {
    const auto n = static_cast<std::size_t>(grid_.space_nodes());
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(k) * n, n);
  }

  /// Multilinear periodic interpolation in x at a fixed time slice.
  double interpolate(const Vec<D>& x, int k) const {
    return interpolate_slice(grid_, slice(wrap_index(k, grid_.nt)), x);
  }

  /// Multilinear in x, linear in t, periodic in both.
  double interpolate(const Vec<D>& x, double t) const {
    const double st = wrap_unit(t) * grid_.nt;
    int k0 = static_cast<int>(std::floor(st));
    const double w = st - k0;
    k0 = wrap_index(k0, grid_.nt);
    const double a = interpolate(x, k0);
    if (w == 0.0) return a;
    return (1.0 - w) * a + w * interpolate(x, k0 + 1);
  }

  static double interpolate_slice(const SpaceTimeGrid<D>& grid, std::span<const double> values,
                                  const Vec<D>& x) {
    IVec<D> lo{};
    Vec<D> frac{};
    for (int i = 0; i < D; ++i) {
      const double s = wrap_unit(x[i]) * grid.nx;
      lo[i] = static_cast<int>(std::floor(s));
      frac[i] = s - lo[i];
    }
    double acc = 0.0;
    for (int corner = 0; corner < (1 << D); ++corner) {
      double w = 1.0;
      IVec<D> c = lo;
      for (int i = 0; i < D; ++i) {
        if (corner & (1 << i)) {
          w *= frac[i];
          c[i] += 1;
        } else {
          w *= 1.0 - frac[i];
        }
      }
      if (w != 0.0) acc += w * values[static_cast<std::size_t>(grid.space_index(c))];
    }
    return acc;
  }

 private:
  SpaceTimeGrid<D> grid_{};
  std::vector<double> data_;
};

/// Free-function form of ValueField::interpolate.
template <int D>
double interpolate(const ValueField<D>& field, const Vec<D>& x, int t_index) {
  return field.interpolate(x, t_index);
}

// ---------------------------------------------------------------------------
// Trigonometric polynomials on T^D x T
// ---------------------------------------------------------------------------

/// One term a cos(2 pi (k.x + m t)) + b sin(2 pi (k.x + m t)).
template <int D>
struct TrigTerm {
  IVec<D> k{};
  int m = 0;
  double a_cos = 0.0;
  double a_sin = 0.0;
};

template <int D>
struct TrigPoly {
  double constant = 0.0;
  std::vector<TrigTerm<D>> terms;

  double value(const Vec<D>& x, double t) const {
    double s = constant;
    for (const auto& term : terms) {
      const double th = phase(term, x, t);
      s += term.a_cos * std::cos(th) + term.a_sin * std::sin(th);
    }
    return s;
  }

  Vec<D> grad_x(const Vec<D>& x, double t) const {
    Vec<D> g{};
    for (const auto& term : terms) {
      const double d = kTwoPi * derivative_factor(term, x, t);
      for (int i = 0; i < D; ++i) g[i] += d * term.k[i];
    }
    return g;
  }

  double d_t(const Vec<D>& x, double t) const {
    double g = 0.0;
    for (const auto& term : terms) g += kTwoPi * term.m * derivative_factor(term, x, t);
    return g;
  }

  /// Gradient in x of grad_x f . v + d_t f.
  Vec<D> hessian_dot(const Vec<D>& x, const Vec<D>& v, double t) const {
    Vec<D> g{};
    for (const auto& term : terms) {
      const double th = phase(term, x, t);
      const double second = -term.a_cos * std::cos(th) - term.a_sin * std::sin(th);
      double kv = term.m;
      for (int i = 0; i < D; ++i) kv += term.k[i] * v[i];
      for (int i = 0; i < D; ++i) g[i] += kTwoPi * kTwoPi * second * term.k[i] * kv;
    }
    return g;
  }

  bool empty() const { return constant == 0.0 && terms.empty(); }

 private:
  static double phase(const TrigTerm<D>& term, const Vec<D>& x, double t) {
    double th = term.m * t;
    for (int i = 0; i < D; ++i) th += term.k[i] * x[i];
    return kTwoPi * th;
  }
  // d/dtheta of (a cos + b sin)
  static double derivative_factor(const TrigTerm<D>& term, const Vec<D>& x, double t) {
    const double th = phase(term, x, t);
    return -term.a_cos * std::sin(th) + term.a_sin * std::cos(th);
  }
};

// ---------------------------------------------------------------------------
// Closed one-forms
// ---------------------------------------------------------------------------

/// Smooth bump amplitude * (1 - cos 2 pi s)^3 on s = (x_axis - lo)/(hi - lo) in [0,1],
/// zero elsewhere; it is C^5 and integrates to 2.5 * amplitude * (hi - lo).
struct AxisBump {
  int axis = 0;
  double lo = 0.0;
  double hi = 1.0;
  double amplitude = 1.0;

  double value(double x) const {
    double y = x - lo;
    y -= std::floor(y);
    const double width = hi - lo;
    if (y >= width) return 0.0;
    const double c = 1.0 - std::cos(kTwoPi * y / width);
    return amplitude * c * c * c;
  }
  double derivative(double x) const {
    double y = x - lo;
    y -= std::floor(y);
    const double width = hi - lo;
    if (y >= width) return 0.0;
    const double a = kTwoPi * y / width;
    const double c = 1.0 - std::cos(a);
    return amplitude * 3.0 * c * c * std::sin(a) * kTwoPi / width;
  }
  double integral() const { return 2.5 * amplitude * (hi - lo); }
};

/// omega = c.dx + tau dt + d f + sum_j bump_j(x_{axis_j}) dx_{axis_j}; closed by construction.
template <int D>
struct OneForm {
  Vec<D> c{};
  double tau = 0.0;
  TrigPoly<D> exact;  // f in the exact part d f
  std::vector<AxisBump> bumps;

  static OneForm constant(const Vec<D>& c, double tau = 0.0) {
    OneForm w;
    w.c = c;
    w.tau = tau;
    return w;
  }

  Vec<D> omega_x(const Vec<D>& x, double t) const {
    Vec<D> w = c;
    const Vec<D> g = exact.grad_x(x, t);
    for (int i = 0; i < D; ++i) w[i] += g[i];
    for (const auto& b : bumps) w[b.axis] += b.value(x[b.axis]);
    return w;
  }
  double omega_t(const Vec<D>& x, double t) const { return tau + exact.d_t(x, t); }

  /// omega_(x,t).(v, 1)
  double pair(const Vec<D>& x, const Vec<D>& v, double t) const {
    return dot<D>(omega_x(x, t), v) + omega_t(x, t);
  }

  /// Gradient in x of omega_(x,t).(v,1) at fixed v.
  Vec<D> d_pair_dx(const Vec<D>& x, const Vec<D>& v, double t) const {
    Vec<D> g = exact.hessian_dot(x, v, t);
    for (const auto& b : bumps) g[b.axis] += b.derivative(x[b.axis]) * v[b.axis];
    return g;
  }

  /// Declared class (c, tau) in H^1(T^D) x H^1(T).
  std::pair<Vec<D>, double> cohomology() const {
    Vec<D> cc = c;
    for (const auto& b : bumps) cc[b.axis] += b.integral();
    return {cc, tau};
  }

  OneForm scaled(double a) const {
    OneForm w = *this;
    for (auto& ci : w.c) ci *= a;
    w.tau *= a;
    w.exact.constant *= a;
    for (auto& term : w.exact.terms) {
      term.a_cos *= a;
      term.a_sin *= a;
    }
    for (auto& b : w.bumps) b.amplitude *= a;
    return w;
  }

  /// Sum of two forms (classes add).
  OneForm operator+(const OneForm& o) const {
    OneForm w = *this;
    for (int i = 0; i < D; ++i) w.c[i] += o.c[i];
    w.tau += o.tau;
    w.exact.constant += o.exact.constant;
    w.exact.terms.insert(w.exact.terms.end(), o.exact.terms.begin(), o.exact.terms.end());
    w.bumps.insert(w.bumps.end(), o.bumps.begin(), o.bumps.end());
    return w;
  }
  OneForm operator-() const { return scaled(-1.0); }

  /// True when omega_x and omega_t do not depend on (x, t).
  bool is_constant() const { return exact.terms.empty() && bumps.empty(); }

  bool is_zero() const {
    bool z = tau == 0.0 && exact.terms.empty() && bumps.empty();
    for (double ci : c) z = z && ci == 0.0;
    return z;
  }
};

/// Loop integrals along each coordinate circle through (x0, t0) and along the
/// time circle, by the trapezoid rule with `samples` points.
template <int D>
std::pair<Vec<D>, double> loop_integrals(const OneForm<D>& w, const std::type_identity_t<Vec<D>>& x0 = {},
                                         double t0 = 0.0, int samples = 4096) {
  Vec<D> spatial{};
  for (int i = 0; i < D; ++i) {
    double acc = 0.0;
    for (int j = 0; j < samples; ++j) {
      Vec<D> x = x0;
      x[i] = wrap_unit(x0[i] + static_cast<double>(j) / samples);
      acc += w.omega_x(x, t0)[i];
    }
    spatial[i] = acc / samples;
  }
  double temporal = 0.0;
  for (int j = 0; j < samples; ++j)
    temporal += w.omega_t(x0, wrap_unit(t0 + static_cast<double>(j) / samples));
  return {spatial, temporal / samples};
}

/// Largest exterior-derivative component of w over grid nodes, by centered
/// differences with step h.
template <int D>
double closedness_defect_fd(const OneForm<D>& w, const SpaceTimeGrid<D>& grid, double h = 1e-4) {
  double worst = 0.0;
  for (int k = 0; k < grid.nt; ++k) {
    const double t = grid.time(k);
    for (int s = 0; s < grid.space_nodes(); ++s) {
      const Vec<D> x = grid.position(s);
      for (int i = 0; i < D; ++i) {
        Vec<D> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        // d(omega)_{x_i t} = d_t omega_i - d_i omega_t
        const double dti = (w.omega_x(x, t + h)[i] - w.omega_x(x, t - h)[i]) / (2 * h);
        const double dit = (w.omega_t(xp, t) - w.omega_t(xm, t)) / (2 * h);
        worst = std::max(worst, std::abs(dti - dit));
        for (int j = i + 1; j < D; ++j) {
          Vec<D> yp = x, ym = x;
          yp[j] += h;
          ym[j] -= h;
          const double dji = (w.omega_x(yp, t)[i] - w.omega_x(ym, t)[i]) / (2 * h);
          const double dij = (w.omega_x(xp, t)[j] - w.omega_x(xm, t)[j]) / (2 * h);
          worst = std::max(worst, std::abs(dji - dij));
        }
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Lagrangian systems and their Hamiltonians
// ---------------------------------------------------------------------------

template <int D>
class LagrangianSystem;

/// Legendre-dual view H(x,p,t) = |p + omega_x|^2/2 + omega_t + U(x,t) - s.
template <int D>
class HamiltonianView {
 public:
  explicit HamiltonianView(const LagrangianSystem<D>& sys) : sys_(&sys) {}
  double H(const Vec<D>& x, const Vec<D>& p, double t) const;
  Vec<D> dHdp(const Vec<D>& x, const Vec<D>& p, double t) const;

 private:
  const LagrangianSystem<D>* sys_;
};

/// L(x,v,t) = |v|^2/2 - omega_(x,t).(v,1) - U(x,t) + shift, with
/// U = potential + scale * grid_potential.
template <int D>
class LagrangianSystem {
 public:
  LagrangianSystem() = default;
  LagrangianSystem(std::string family, TrigPoly<D> potential)
      : family_(std::move(family)), potential_(std::move(potential)) {}

  /// L = |v|^2/2.
  static LagrangianSystem free_particle() { return LagrangianSystem("free", {}); }

  /// L = |v|^2/2 - V with V(x,t) = sum_i (cos 2 pi x_i - 1)(1 + sin(2 pi t)/2).
  /// V <= 0 and V vanishes exactly on {x = 0}.
  static LagrangianSystem pendulum() {
    TrigPoly<D> v;
    for (int i = 0; i < D; ++i) {
      IVec<D> e{};
      e[i] = 1;
      // (cos a - 1)(1 + sin b / 2)
      //   = cos a - 1 + sin(a+b)/4 - sin(a-b)/4 - sin(b)/2
      v.terms.push_back({e, 0, 1.0, 0.0});
      v.terms.push_back({e, 1, 0.0, 0.25});
      v.terms.push_back({e, -1, 0.0, -0.25});
      v.terms.push_back({IVec<D>{}, 1, 0.0, -0.5});
      v.constant -= 1.0;
    }
    return LagrangianSystem("pendulum", std::move(v));
  }

  /// L = |v|^2/2 - V for a user-supplied trigonometric V.
  static LagrangianSystem mechanical(TrigPoly<D> v) {
    return LagrangianSystem("trig", std::move(v));
  }

  const std::string& family() const { return family_; }
  const TrigPoly<D>& potential() const { return potential_; }
  /// Constant spatial part c of the subtracted closed form.
  const Vec<D>& tilt() const { return form_.c; }
  const OneForm<D>& form() const { return form_; }
  double shift() const { return shift_; }
  const ValueField<D>* grid_potential() const { return grid_potential_.get(); }
  double grid_potential_scale() const { return grid_scale_; }

  /// L - c.v (tilting by the closed form c dx).
  LagrangianSystem tilted(const Vec<D>& c) const {
    LagrangianSystem out = *this;
    for (int i = 0; i < D; ++i) out.form_.c[i] += c[i];
    return out;
  }
  /// L + a.
  LagrangianSystem shifted(double a) const {
    LagrangianSystem out = *this;
    out.shift_ += a;
    return out;
  }
  /// L - scale * W for a grid-sampled W; replaces any previous grid term.
  LagrangianSystem minus_field(const ValueField<D>& w, double scale = 1.0) const {
    LagrangianSystem out = *this;
    out.grid_potential_ = std::make_shared<const ValueField<D>>(w);
    out.grid_scale_ = scale;
    return out;
  }

  /// U(x,t), the negated potential energy term.
  double U(const Vec<D>& x, double t) const {
    double u = potential_.value(x, t);
    if (grid_potential_) u += grid_scale_ * grid_potential_->interpolate(x, t);
    return u;
  }

  /// U at a grid node of `grid`; exact for the grid term when the grids match.
  double U_node(const SpaceTimeGrid<D>& grid, int s, int k) const {
    double u = potential_.value(grid.position(s), grid.time(k));
    if (grid_potential_) {
      if (grid_potential_->grid() == grid)
        u += grid_scale_ * grid_potential_->at(s, k);
      else
        u += grid_scale_ * grid_potential_->interpolate(grid.position(s), grid.time(k));
    }
    return u;
  }

  Vec<D> grad_U(const Vec<D>& x, double t) const {
    Vec<D> g = potential_.grad_x(x, t);
    if (grid_potential_) {
      const double h = 0.5 * grid_potential_->grid().dx();
      for (int i = 0; i < D; ++i) {
        Vec<D> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] += grid_scale_ *
                (grid_potential_->interpolate(xp, t) - grid_potential_->interpolate(xm, t)) /
                (2.0 * h);
      }
    }
    return g;
  }

  /// L - omega for a closed one-form omega (same Euler-Lagrange flow).
  LagrangianSystem minus_form(const OneForm<D>& w) const {
    LagrangianSystem out = *this;
    out.form_ = out.form_ + w;
    return out;
  }

  /// |v|^2/2 - c.v, the part of L that depends on v alone.
  double kinetic(const Vec<D>& v) const { return 0.5 * dot<D>(v, v) - dot<D>(form_.c, v); }
  /// omega.(v,1) - c.v: the (x,t)-dependent part of the subtracted form.
  double form_remainder(const Vec<D>& x, const Vec<D>& v, double t) const {
    return form_.pair(x, v, t) - dot<D>(form_.c, v);
  }

  double L(const Vec<D>& x, const Vec<D>& v, double t) const {
    return kinetic(v) - form_remainder(x, v, t) - U(x, t) + shift_;
  }
  Vec<D> dLdv(const Vec<D>& x, const Vec<D>& v, double t) const {
    const Vec<D> w = form_.omega_x(x, t);
    Vec<D> p{};
    for (int i = 0; i < D; ++i) p[i] = v[i] - w[i];
    return p;
  }
  Vec<D> dLdx(const Vec<D>& x, const Vec<D>& v, double t) const {
    Vec<D> g = grad_U(x, t);
    const Vec<D> f = form_.d_pair_dx(x, v, t);
    for (int i = 0; i < D; ++i) g[i] = -g[i] - f[i];
    return g;
  }
  /// Lower bound on the eigenvalues of the velocity Hessian.
  double convexity_modulus() const { return 1.0; }

  HamiltonianView<D> hamiltonian() const { return HamiltonianView<D>(*this); }

 private:
  std::string family_ = "free";
  TrigPoly<D> potential_{};
  OneForm<D> form_{};
  double shift_ = 0.0;
  std::shared_ptr<const ValueField<D>> grid_potential_;
  double grid_scale_ = 1.0;
};

template <int D>
double HamiltonianView<D>::H(const Vec<D>& x, const Vec<D>& p, double t) const {
  const Vec<D> w = sys_->form().omega_x(x, t);
  Vec<D> q{};
  for (int i = 0; i < D; ++i) q[i] = p[i] + w[i];
  return 0.5 * dot<D>(q, q) + sys_->form().omega_t(x, t) + sys_->U(x, t) - sys_->shift();
}

template <int D>
Vec<D> HamiltonianView<D>::dHdp(const Vec<D>& x, const Vec<D>& p, double t) const {
  const Vec<D> w = sys_->form().omega_x(x, t);
  Vec<D> q{};
  for (int i = 0; i < D; ++i) q[i] = p[i] + w[i];
  return q;
}

/// Momentum p = dL/dv and energy h = p.v - L at (x, v, t).
template <int D>
struct LegendrePoint {
  Vec<D> p;
  double h;
};

template <int D>
LegendrePoint<D> legendre(const LagrangianSystem<D>& sys, const std::type_identity_t<Vec<D>>& x,
                          const std::type_identity_t<Vec<D>>& v,
                          double t) {
  const Vec<D> p = sys.dLdv(x, v, t);
  return {p, dot<D>(p, v) - sys.L(x, v, t)};
}

/// Checks L(x,w,t) > L(x,v,t) + dLdv(x,v,t).(w-v) on one sample pair.
template <int D>
bool convexity_holds(const LagrangianSystem<D>& sys, const std::type_identity_t<Vec<D>>& x,
                     const std::type_identity_t<Vec<D>>& v, const std::type_identity_t<Vec<D>>& w, double t) {
  const Vec<D> p = sys.dLdv(x, v, t);
  Vec<D> d{};
  for (int i = 0; i < D; ++i) d[i] = w[i] - v[i];
  if (norm<D>(d) == 0.0) return true;
  return sys.L(x, w, t) > sys.L(x, v, t) + dot<D>(p, d);
}

/// min over grid nodes and box-boundary directions of L / |v| at |v| = v_max.
template <int D>
double superlinearity_witness(const LagrangianSystem<D>& sys, const SpaceTimeGrid<D>& grid,
                              int directions = 16) {
  double best = INFINITY;
  for (int k = 0; k < grid.nt; ++k) {
    for (int s = 0; s < grid.space_nodes(); ++s) {
      const Vec<D> x = grid.position(s);
      const int ndir = D == 1 ? 2 : directions;
      for (int j = 0; j < ndir; ++j) {
        Vec<D> v{};
        if constexpr (D == 1) {
          v[0] = j == 0 ? grid.v_max : -grid.v_max;
        } else {
          const double th = kTwoPi * j / ndir;
          v[0] = grid.v_max * std::cos(th);
          v[1] = grid.v_max * std::sin(th);
        }
        best = std::min(best, sys.L(x, v, grid.time(k)) / grid.v_max);
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Euler-Lagrange flow
// ---------------------------------------------------------------------------

template <int D>
struct PhasePoint {
  Vec<D> x{};
  Vec<D> v{};
  double t = 0.0;
};

/// One classical fourth-order Runge-Kutta step of x' = v, v' = -grad U.
/// x and t are wrapped back to the unit torus.
template <int D>
PhasePoint<D> euler_lagrange_step(const LagrangianSystem<D>& sys, const PhasePoint<D>& state,
                                  double dt, double v_max) {
  if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");
  auto accel = [&](const Vec<D>& x, double t) {
    Vec<D> a = sys.grad_U(x, t);
    for (auto& ai : a) ai = -ai;
    return a;
  };
  auto add = [](const Vec<D>& a, const Vec<D>& b, double s) {
    Vec<D> r{};
    for (int i = 0; i < D; ++i) r[i] = a[i] + s * b[i];
    return r;
  };
  const Vec<D>& x = state.x;
  const Vec<D>& v = state.v;
  const double t = state.t;
  const Vec<D> k1x = v;
  const Vec<D> k1v = accel(x, t);
  const Vec<D> k2x = add(v, k1v, 0.5 * dt);
  const Vec<D> k2v = accel(add(x, k1x, 0.5 * dt), t + 0.5 * dt);
  const Vec<D> k3x = add(v, k2v, 0.5 * dt);
  const Vec<D> k3v = accel(add(x, k2x, 0.5 * dt), t + 0.5 * dt);
  const Vec<D> k4x = add(v, k3v, dt);
  const Vec<D> k4v = accel(add(x, k3x, dt), t + dt);
  PhasePoint<D> out;
  for (int i = 0; i < D; ++i) {
    out.x[i] = wrap_unit(x[i] + dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]));
    out.v[i] = v[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
  }
  out.t = wrap_unit(t + dt);
  if (norm<D>(out.v) > v_max)
    throw VelocityEscape("orbit speed " + std::to_string(norm<D>(out.v)) +
                         " left the velocity box |v| <= " + std::to_string(v_max));
  return out;
}

/// Chains steps of size at most `substep` to advance by `duration`.
template <int D>
PhasePoint<D> euler_lagrange_flow(const LagrangianSystem<D>& sys, PhasePoint<D> state,
                                  double duration, double substep, double v_max) {
  const int n = std::max(1, static_cast<int>(std::ceil(duration / substep - 1e-12)));
  const double h = duration / n;
  for (int i = 0; i < n; ++i) state = euler_lagrange_step(sys, state, h, v_max);
  return state;
}

/// Sorted list of space-time node indices.
using NodeSet = std::vector<int>;

}  // namespace wkam
