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

// Acceptance harness: one PASS/FAIL line per criterion; exit status 1 when
// any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "wkam/wkam.hpp"

namespace {

using namespace wkam;
namespace fs = std::filesystem;

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double max_gap = 0.0;  // largest LP duality gap seen by any criterion
int lp_count = 0;

void note_gap(double g) {
  if (std::isnan(g)) return;
  max_gap = std::max(max_gap, g);
  ++lp_count;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

SpaceTimeGrid<1> doubled(const SpaceTimeGrid<1>& g) {
  SpaceTimeGrid<1> f = g;
  f.nx *= 2;
  f.nt *= 2;
  f.nv = 2 * (g.nv - 1) + 1;
  return f;
}

AlphaOptions routes(bool lp) {
  AlphaOptions o;
  o.use_lp = lp;
  return o;
}

/// Pendulum reference data at the default resolution.
struct Reference {
  SpaceTimeGrid<1> grid;
  LagrangianSystem<1> sys = LagrangianSystem<1>::pendulum();
  DynamicProgram<1> dp{LagrangianSystem<1>::pendulum(), SpaceTimeGrid<1>{}};
  BarrierWindow win;
  ViOptions vi;
  double alpha = 0.0;
  AubryEstimate aubry;
  WeakKamPair<1> pair;
  BarrierTable table;
  std::vector<EpsilonEntry> eps;
  ValueField<1> chi;

  Reference() {
    alpha = critical_value_vi(dp, vi).alpha;
    aubry = aubry_set(dp, alpha, win);
    pair = weak_kam_pair(dp, vi, aubry.nodes);
    table = BarrierTable::build(dp, default_probes(grid, aubry.nodes, 64, 7), alpha, win);
    eps = epsilon_table(table, 10);
    chi = chi_field(pair, eps);
  }
};

const Reference& ref() {
  static const Reference r;
  return r;
}

Outcome c1_flat_alpha() {
  const auto t0 = std::chrono::steady_clock::now();
  const AlphaExplorer<1> ex(LagrangianSystem<1>::free_particle(), SpaceTimeGrid<1>{}, routes(true));
  double worst = 0.0, agree = 0.0;
  for (double c : {0.0, 0.25, 0.5, 1.0}) {
    const auto s = ex.eval(Vec<1>{c});
    note_gap(s.duality_gap);
    const double exact = 0.5 * c * c;
    worst = std::max({worst, std::abs(s.alpha_vi - exact), std::abs(s.alpha_lp - exact)});
    agree = std::max(agree, std::abs(s.alpha_vi - s.alpha_lp));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 5e-2 && agree <= 2e-2 && secs <= 120.0,
          "max |alpha - c^2/2| = " + fmt(worst) + ", route gap = " + fmt(agree) + ", " + fmt(secs) + " s"};
}

Outcome c2_pendulum_aubry() {
  const auto& R = ref();
  double far = 0.0;
  std::vector<int> per_slice(static_cast<std::size_t>(R.grid.nt), 0);
  for (int n : R.aubry.nodes) {
    far = std::max(far, std::abs(circle_delta(R.grid.position(R.grid.space_of(n))[0], 0.0)));
    ++per_slice[static_cast<std::size_t>(R.grid.slice_of(n))];
  }
  const bool every_slice = std::all_of(per_slice.begin(), per_slice.end(), [](int k) { return k > 0; });
  return {std::abs(R.alpha) <= 2e-2 && far <= 2.0 * R.grid.dx() + 1e-12 && every_slice,
          "alpha(0) = " + fmt(R.alpha) + ", widest Aubry node at |x| = " + fmt(far) + " (" +
              std::to_string(R.aubry.nodes.size()) + " nodes)"};
}

Outcome c3_closed_measures() {
  const auto& R = ref();
  const auto k3 = solve_lp(build_lp(R.sys, R.grid, OneForm<1>{}, TestFunctionBasis<1>{3, 2}));
  const auto k2 = solve_lp(build_lp(R.sys, R.grid, OneForm<1>{}, TestFunctionBasis<1>{2, 2}));
  note_gap(k3.solution.duality_gap);
  note_gap(k2.solution.duality_gap);
  const double inv = invariance_defect(R.sys, k3.mu, R.grid.dt());
  const double refine = std::abs(k3.value - k2.value);
  return {inv <= 0.1 && refine <= 1e-2, "invariance defect = " + fmt(inv) + ", |value(K=3) - value(K=2)| = " + fmt(refine)};
}

Outcome c4_occupation() {
  const auto& R = ref();
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i)
    worst = std::max(worst, max_closedness_defect(random_occupation_measure(R.sys, R.grid, 50, 1.5, rng),
                                                  TestFunctionBasis<1>{2, 2}));
  return {worst <= 5e-2, "max closedness defect over 10 orbits = " + fmt(worst)};
}

Outcome c5_lemma() {
  const auto& R = ref();
  const double eps = 0.125;
  const int N = n_epsilon(R.table, eps);
  const NodeSet a = a_epsilon(R.pair, eps);
  std::mt19937_64 rng(7);
  int pass = 0;
  double worst = kInf;
  for (int i = 0; i < 100; ++i) {
    const auto c = random_spline_curve(R.grid, rng, 2.0, 8);
    const auto r = check_lemma_formule(R.sys, R.pair, c, eps, N, a, 1e-9);
    pass += r.pass;
    worst = std::min(worst, r.margin);
  }
  bool minimal = true;
  for (const auto& e : R.eps) {
    if (!n_epsilon_condition(R.table, e.N, e.eps)) minimal = false;
    if (e.N > 1 && n_epsilon_condition(R.table, e.N - 1, e.eps)) minimal = false;
  }
  return {pass == 100 && minimal, std::to_string(pass) + "/100 curves, N(1/8) = " + std::to_string(N) +
                                      ", smallest margin = " + fmt(worst) +
                                      (minimal ? ", N(eps) minimal on all entries" : ", N(eps) NOT minimal")};
}

struct Built {
  Perturbation<1> P;
  SubsolutionCertificate<1> cert;
};

const Built& built() {
  static const Built b = [] {
    const auto& R = ref();
    Built out;
    out.P = build_perturbation(R.grid, R.aubry.nodes, R.chi);
    const DynamicProgram<1> pdp(R.sys.minus_field(out.P.W), R.grid);
    const auto ppair = weak_kam_pair(pdp, R.vi, R.aubry.nodes);
    out.cert = subsolution_with_retry(R.dp, ppair.u_minus, out.P.W, dilate_spatial(R.grid, R.aubry.nodes, 2),
                                      ppair.alpha, 2.0 * R.grid.dx(), 1e-2);
    return out;
  }();
  return b;
}

Outcome c6_subsolution() {
  const auto& R = ref();
  const auto& B = built();
  const auto trivial = certify(R.dp, ValueField<1>(R.grid, 0.0), 0.0, 1e-2);
  double err = 0.0;
  for (int k = 0; k < R.grid.nt; ++k)
    for (int y = 0; y < R.grid.nx; ++y) {
      const double V = (std::cos(2 * kPi * R.grid.position(y)[0]) - 1.0) * (1.0 + 0.5 * std::sin(2 * kPi * R.grid.time(k)));
      err = std::max(err, std::abs(trivial.strictness.at(y, k) + V));
    }
  return {B.cert.defect_ok && B.cert.strictness_ok && err <= 1e-10,
          "max defect = " + fmt(B.cert.max_defect) + ", strictness - W/2 >= " + fmt(B.cert.strictness_margin) +
              ", |strictness(u=0) + V| <= " + fmt(err)};
}

Outcome c7_invariance() {
  const auto& R = ref();
  const auto rep = perturbation_invariance_check(R.dp, built().P.W, R.alpha, R.aubry, R.win, R.vi, 2e-2);
  std::string d;
  for (const auto& r : rep.runs)
    d += (d.empty() ? "" : "; ") + std::string("scale ") + fmt(r.scale) + ": |dalpha| = " + fmt(std::abs(r.alpha - R.alpha)) +
         ", aubry " + (r.aubry_ok ? "stable" : "MOVED");
  return {rep.passed() && rep.runs.size() == 2, d};
}

Outcome c8_faces() {
  const auto& R = ref();
  const SpaceTimeGrid<1> fine = doubled(R.grid);
  const double tol = 3e-2;
  std::string d;
  bool ok = true;

  // (a) flat: no face in either direction (deltas above the velocity lattice resolution).
  {
    const AlphaExplorer<1> ex(LagrangianSystem<1>::free_particle(), R.grid, routes(true));
    const auto center = ex.eval(Vec<1>{0.0});
    double star = 0.0;
    for (double e : {1.0, -1.0}) {
      const auto fp = face_probe(ex, center, Vec<1>{e}, {0.25, 0.5, 1.0}, tol);
      star = std::max(star, fp.delta_star);
      for (const auto& row : fp.rows) note_gap(row.plus.duality_gap), note_gap(row.minus.duality_gap);
    }
    ok = ok && star == 0.0;
    d += "(a) flat delta* = " + fmt(star);
  }
  // (b) pendulum: affine on [-0.5, 0.5] with consistent slope; doubled-grid recomputation.
  {
    const AlphaExplorer<1> ex(R.sys, R.grid, routes(true));
    const auto center = ex.eval(Vec<1>{0.0});
    const auto fp = face_probe(ex, center, Vec<1>{1.0}, {0.1, 0.3, 0.5}, tol);
    for (const auto& row : fp.rows) note_gap(row.plus.duality_gap), note_gap(row.minus.duality_gap);
    const AlphaExplorer<1> fx(R.sys, fine, routes(false));
    const double a0 = fx.eval(Vec<1>{0.0}).alpha_vi;
    double fine_sym = 0.0;
    for (double dl : {0.1, 0.3, 0.5})
      fine_sym = std::max(fine_sym, std::abs(fx.eval(Vec<1>{dl}).alpha_vi + fx.eval(Vec<1>{-dl}).alpha_vi - 2 * a0));
    const bool b = fp.delta_star >= 0.5 && fp.slope_consistent && fine_sym <= tol;
    ok = ok && b;
    d += "; (b) delta* = " + fmt(fp.delta_star) + ", fine symmetric <= " + fmt(fine_sym);
  }
  // (c) bump form supported in [0.3, 0.7].
  {
    const AlphaExplorer<1> ex(R.sys, R.grid, routes(true));
    OneForm<1> bump;
    bump.bumps.push_back({0, 0.3, 0.7, 1.0});
    const auto rep = e0_witness_test(ex, bump, R.aubry.nodes, R.pair, R.table, tol);
    note_gap(rep.plus.duality_gap);
    note_gap(rep.minus.duality_gap);
    const AlphaExplorer<1> fx(R.sys, fine, routes(false));
    const double fine_sym = std::abs(fx.eval_form(bump.scaled(rep.delta)).alpha_vi +
                                     fx.eval_form(bump.scaled(-rep.delta)).alpha_vi - 2 * fx.eval(Vec<1>{0.0}).alpha_vi);
    const bool c = rep.certified && fine_sym <= tol;
    ok = ok && c;
    d += "; (c) e0 delta = " + fmt(rep.delta) + ", symmetric = " + fmt(rep.symmetric_vi) + ", fine " + fmt(fine_sym);
  }
  // (d) g0 witness at c = 0.3, on both resolutions.
  {
    auto residual = [&](const SpaceTimeGrid<1>& g) {
      const DynamicProgram<1> dp0(R.sys, g);
      const double a0 = critical_value_vi(dp0, R.vi).alpha;
      const auto aub = aubry_set(dp0, a0, R.win);
      const auto p0 = weak_kam_pair(dp0, R.vi, aub.nodes);
      const DynamicProgram<1> dpc(R.sys.tilted(Vec<1>{0.3}), g);
      const auto pc = weak_kam_pair(dpc, R.vi, aub.nodes);
      return g0_witness_build<1>(Vec<1>{0.3}, p0.alpha, pc.alpha, p0.u_minus, pc.u_minus, aub.nodes).residual;
    };
    const double r0 = residual(R.grid), r1 = residual(fine);
    ok = ok && r0 <= 5e-2 && r1 <= 5e-2;
    d += "; (d) g0 residual = " + fmt(r0) + ", fine " + fmt(r1);
  }
  return {ok, d};
}

double brute_force(const SpaceTimeGrid<1>& g, int x0, int k0, int x1, int steps, int J) {
  const auto sys = LagrangianSystem<1>::pendulum();
  const int nj = 2 * J + 1;
  const double unit = g.dx() / g.dt();
  std::vector<double> cost(static_cast<std::size_t>(g.nx * g.nt * nj));
  for (int y = 0; y < g.nx; ++y)
    for (int k = 0; k < g.nt; ++k)
      for (int j = -J; j <= J; ++j) {
        const double x = y * g.dx(), v = j * unit, t = g.time(k);
        const double V = (std::cos(2 * kPi * x) - 1.0) * (1.0 + 0.5 * std::sin(2 * kPi * t));
        cost[static_cast<std::size_t>((y * g.nt + k) * nj + j + J)] = g.dt() * (0.5 * v * v - V);
      }
  double best = kInf;
  auto walk = [&](auto&& self, int x, int k, int left, double acc) -> void {
    if (left == 0) {
      if (x == x1) best = std::min(best, acc);
      return;
    }
    for (int j = -J; j <= J; ++j) {
      const int y = wrap_index(x + j, g.nx);
      self(self, y, (k + 1) % g.nt, left - 1, acc + cost[static_cast<std::size_t>((y * g.nt + k) * nj + j + J)]);
    }
  };
  walk(walk, x0, k0, steps, 0.0);
  return best;
}

Outcome c9_tiny_oracle() {
  SpaceTimeGrid<1> g;
  g.nx = 8;
  g.nt = 4;
  g.nv = 9;
  g.v_max = 2.0;
  const DynamicProgram<1> dp(LagrangianSystem<1>::pendulum(), g);
  double err = 0.0;
  for (const auto& [x0, k0, x1] : std::vector<std::array<int, 3>>{{0, 0, 0}, {0, 0, 4}, {3, 1, 6}, {7, 3, 1}})
    err = std::max(err, std::abs(finite_action(dp, g.node(x0, k0), g.node(x1, k0), 2, 0.0) -
                                 brute_force(g, x0, k0, x1, 2 * g.nt, 4)));
  return {err <= 1e-12 && max_gap <= 1e-9 && lp_count > 0,
          "max |DP - enumeration| = " + fmt(err) + ", max duality gap = " + fmt(max_gap) + " over " +
              std::to_string(lp_count) + " programs"};
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    out[e.path().filename().string()] = os.str();
  }
  return out;
}

Outcome c10_determinism() {
  const fs::path base = fs::temp_directory_path() / "wkam_acceptance";
  fs::remove_all(base);
  const std::string config = (fs::path(WKAM_SOURCE_DIR) / "configs" / "pendulum.json").string();
  int rcs[2];
  for (int i = 0; i < 2; ++i) {
    const std::string cmd = std::string(WKAM_CLI) + " all --config " + config + " --out " +
                            (base / std::to_string(i)).string() + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    rcs[i] = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  if (rcs[0] != 0 || rcs[1] != 0)
    return {false, "exit codes " + std::to_string(rcs[0]) + ", " + std::to_string(rcs[1])};
  const auto a = read_tree(base / "0"), b = read_tree(base / "1");
  int differ = 0;
  for (const auto& [name, content] : a)
    if (!b.count(name) || b.at(name) != content) ++differ;
  const bool ok = differ == 0 && a.size() == b.size() && !a.empty();
  fs::remove_all(base);
  return {ok, std::to_string(a.size()) + " files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"flat alpha by both routes", c1_flat_alpha},
      {"pendulum critical value and Aubry tube", c2_pendulum_aubry},
      {"closed minimizing measure is invariant", c3_closed_measures},
      {"occupation measures are closed", c4_occupation},
      {"lemma harness and minimal N(eps)", c5_lemma},
      {"subsolution certificates", c6_subsolution},
      {"alpha and Aubry invariance under W and W/2", c7_invariance},
      {"face structure and witnesses", c8_faces},
      {"tiny-instance enumeration and LP duality", c9_tiny_oracle},
      {"determinism of the full pipeline", c10_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
