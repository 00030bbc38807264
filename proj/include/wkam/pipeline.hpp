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
 * @file pipeline.hpp
 * @brief Experiment stages behind the command line. Each stage computes,
 * writes its CSV/JSON artifacts atomically and records pass/fail checks;
 * shared intermediate results (critical value, Aubry set, weak KAM pair,
 * probe table, chi) are computed once per run.
 *
 * Only manifest.json carries wall-clock times, so every other artifact is
 * byte-identical across runs with the same configuration and seed.
 */

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wkam/alpha.hpp"
#include "wkam/config.hpp"
#include "wkam/io.hpp"
#include "wkam/laxoleinik.hpp"
#include "wkam/measures.hpp"
#include "wkam/subsolution.hpp"
#include "wkam/verify.hpp"

namespace wkam {

inline constexpr const char* kToolkitVersion = "1.0.0";

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double bound = 0.0;
};

struct StageRecord {
  std::string name;
  double wall_seconds = 0.0;
  std::vector<Check> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

struct RunManifest {
  std::string config_hash;
  std::string version = kToolkitVersion;
  std::string subcommand;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;
  bool passed() const {
    for (const auto& s : stages)
      if (!s.passed()) return false;
    return true;
  }
  json to_json() const {
    json j;
    j["config_hash"] = config_hash;
    j["version"] = version;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    j["passed"] = passed();
    j["stages"] = json::array();
    for (const auto& s : stages) {
      json js;
      js["name"] = s.name;
      js["wall_seconds"] = s.wall_seconds;
      js["passed"] = s.passed();
      js["checks"] = json::array();
      for (const auto& c : s.checks)
        js["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"bound", c.bound}});
      j["stages"].push_back(js);
    }
    return j;
  }
};

/// Hash of the canonical (key-sorted) configuration plus the effective seed.
inline std::string config_hash(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(cfg.source.dump() + "#seed=" + std::to_string(cfg.seed)));
}

template <int D>
class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, std::filesystem::path out)
      : cfg_(std::move(cfg)),
        out_(std::move(out)),
        grid_(make_grid<D>(cfg_.grid)),
        sys_(make_system<D>(cfg_.system)),
        dp_(sys_, grid_) {
    win_ = {cfg_.windows.n_lo, cfg_.windows.n_hi, cfg_.tol.tol_h};
    vi_ = {cfg_.tol.tol_alpha, cfg_.windows.max_iters};
    manifest_.config_hash = config_hash(cfg_);
    manifest_.seed = cfg_.seed;
  }

  const RunManifest& manifest() const { return manifest_; }
  RunManifest& manifest() { return manifest_; }

  /// Runs one named stage ("alpha", "aubry", "barrier", "faces",
  /// "subsolution", "verify-lemma", "closed-lp") or "all".
  void run(const std::string& sub) {
    manifest_.subcommand = sub;
    const std::vector<std::pair<std::string, void (Pipeline::*)(StageRecord&)>> stages = {
        {"aubry", &Pipeline::stage_aubry},        {"barrier", &Pipeline::stage_barrier},
        {"alpha", &Pipeline::stage_alpha},        {"closed-lp", &Pipeline::stage_closed_lp},
        {"verify-lemma", &Pipeline::stage_verify}, {"subsolution", &Pipeline::stage_subsolution},
        {"faces", &Pipeline::stage_faces}};
    bool found = false;
    for (const auto& [name, fn] : stages) {
      if (sub != "all" && sub != name) continue;
      found = true;
      StageRecord rec;
      rec.name = name;
      const auto t0 = std::chrono::steady_clock::now();
      (this->*fn)(rec);
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      manifest_.stages.push_back(std::move(rec));
    }
    if (!found) throw ConfigError("subcommand", "unknown subcommand " + sub);
    write_manifest();
  }

  void write_manifest() const {
    atomic_write(out_ / "manifest.json", manifest_.to_json().dump(2) + "\n");
  }

 private:
  // ---- shared intermediates ------------------------------------------------

  const CriticalValue& critical() {
    if (!critical_) critical_ = critical_value_vi(dp_, vi_);
    return *critical_;
  }
  const AubryEstimate& aubry() {
    if (!aubry_) aubry_ = aubry_set(dp_, critical().alpha, win_);
    return *aubry_;
  }
  const WeakKamPair<D>& pair() {
    if (!pair_) pair_ = weak_kam_pair(dp_, vi_, aubry().nodes);
    return *pair_;
  }
  const BarrierTable& table() {
    if (!table_)
      table_ = BarrierTable::build(
          dp_, default_probes(grid_, aubry().nodes, cfg_.verify.probe_pairs, cfg_.seed),
          critical().alpha, win_);
    return *table_;
  }
  const std::vector<EpsilonEntry>& eps_table() {
    if (!eps_table_) eps_table_ = epsilon_table(table(), cfg_.verify.n_max);
    return *eps_table_;
  }
  const ValueField<D>& chi() {
    if (!chi_) chi_ = chi_field(pair(), eps_table());
    return *chi_;
  }

  void write(const std::string& name, const std::string& content) const {
    atomic_write(out_ / name, content);
  }
  void write_json(const std::string& name, const json& j) const { write(name, j.dump(2) + "\n"); }

  static void add(StageRecord& rec, std::string name, bool ok, double value = 0.0, double bound = 0.0) {
    rec.checks.push_back({std::move(name), ok, value, bound});
  }

  bool lp_enabled() const { return D == 1 && cfg_.alpha.use_lp; }

  Vec<D> along_e1(double c) const {
    Vec<D> v{};
    v[0] = c;
    return v;
  }

  AlphaOptions alpha_options() const {
    AlphaOptions o;
    o.use_lp = lp_enabled();
    o.K = cfg_.basis.K;
    o.M_t = cfg_.basis.M_t;
    o.vi = vi_;
    o.tol_cross = cfg_.tol.tol_cross;
    return o;
  }

  // ---- stages --------------------------------------------------------------

  void stage_aubry(StageRecord& rec) {
    const auto& a = aubry();
    const auto& p = pair();
    const double dom = domination_violation(dp_, p.u_minus, p.alpha);
    double order = -kInf, diag_min = kInf;
    for (int i = 0; i < grid_.nodes(); ++i) order = std::max(order, p.u_plus[i] - p.u_minus[i]);
    for (double h : a.diagonal) diag_min = std::min(diag_min, h);
    add(rec, "domination", dom <= cfg_.tol.tol_dom, dom, cfg_.tol.tol_dom);
    add(rec, "u_plus_below_u_minus", order <= cfg_.tol.tol_dom, order, cfg_.tol.tol_dom);
    add(rec, "diagonal_barrier_nonnegative", diag_min >= -cfg_.tol.tol_h, diag_min, -cfg_.tol.tol_h);
    add(rec, "weak_kam_closure", p.closure_residual <= cfg_.tol.tol_dom, p.closure_residual, cfg_.tol.tol_dom);

    ValueField<D> diag(grid_), member(grid_);
    for (int i = 0; i < grid_.nodes(); ++i) {
      diag[i] = a.diagonal[static_cast<std::size_t>(i)];
      member[i] = contains(a.nodes, i) ? 1.0 : 0.0;
    }
    write("aubry.csv", field_csv<D>({{"h_diag", &diag}, {"aubry", &member}}).str());
    write("weak_kam.csv", field_csv<D>({{"u_plus", &p.u_plus}, {"u_minus", &p.u_minus}}).str());
    write("u_minus.bin", snapshot_bytes(p.u_minus));
    write("u_plus.bin", snapshot_bytes(p.u_plus));
    write_json("aubry.json", {{"alpha0", critical().alpha},
                              {"alpha_bracket", {critical().lower, critical().upper}},
                              {"vi_periods", critical().periods},
                              {"aubry_nodes", a.nodes.size()},
                              {"eps_A", a.eps},
                              {"escalations", a.escalations},
                              {"unconverged_diagonal", a.unconverged},
                              {"domination_violation", dom},
                              {"seed", cfg_.seed}});
  }

  void stage_barrier(StageRecord& rec) {
    const auto& t = table();
    const auto& e = eps_table();
    bool minimal = true;
    CsvTable et({"level", "eps", "N", "chi_cap", "fails_at_N_minus_1"});
    for (const auto& entry : e) {
      const bool fails = entry.N == 1 || !n_epsilon_condition(t, entry.N - 1, entry.eps);
      minimal = minimal && fails;
      et.add({static_cast<double>(entry.level), entry.eps, static_cast<double>(entry.N), entry.chi_cap,
              fails ? 1.0 : 0.0});
    }
    add(rec, "n_epsilon_minimality", minimal);
    std::vector<std::string> header;
    for (const char* side : {"src_", "dst_"}) {
      for (int i = 0; i < D; ++i) header.push_back(std::string(side) + "x" + std::to_string(i));
      header.push_back(std::string(side) + "t");
    }
    header.push_back("h");
    header.push_back("converged");
    CsvTable pt(header);
    int unconverged = 0;
    for (std::size_t p = 0; p < t.size(); ++p) {
      std::vector<double> row;
      for (int node : {t.probes()[p].src, t.probes()[p].dst}) {
        const Vec<D> x = grid_.position(grid_.space_of(node));
        row.insert(row.end(), x.begin(), x.end());
        row.push_back(grid_.time(grid_.slice_of(node)));
      }
      row.push_back(t.h(p));
      row.push_back(t.converged(p) ? 1.0 : 0.0);
      if (!t.converged(p)) ++unconverged;
      pt.add(row);
    }
    add(rec, "probe_barriers_converged", unconverged == 0, unconverged, 0);
    write("epsilon_table.csv", et.str());
    write("barrier_probes.csv", pt.str());
  }

  void stage_alpha(StageRecord& rec) {
    const AlphaExplorer<D> ex(sys_, grid_, alpha_options());
    CsvTable out({"c", "alpha_lp", "alpha_vi", "duality_gap", "consistent"});
    json samples = json::array();
    for (double c : cfg_.alpha.c_values) {
      const auto s = ex.eval(along_e1(c));
      out.add({c, s.alpha_lp, s.alpha_vi, s.duality_gap, s.consistent ? 1.0 : 0.0});
      add(rec, "routes_agree_c=" + format_double(c), s.consistent,
          lp_enabled() ? std::abs(s.alpha_lp - s.alpha_vi) : 0.0, cfg_.tol.tol_cross);
      if (lp_enabled()) add(rec, "duality_gap_c=" + format_double(c), s.duality_gap <= cfg_.tol.tol_lp, s.duality_gap, cfg_.tol.tol_lp);
      samples.push_back({{"c", c},
                         {"alpha_lp", lp_enabled() ? json(s.alpha_lp) : json(nullptr)},
                         {"alpha_vi", s.alpha_vi},
                         {"support_size", s.minimizer_support.size()}});
    }
    write("alpha.csv", out.str());
    write_json("alpha.json", {{"samples", samples}, {"lp_route", lp_enabled()}, {"seed", cfg_.seed}});
  }

  void stage_closed_lp(StageRecord& rec) {
    if constexpr (D != 1) {
      write_json("closed_lp.json", {{"skipped", "the closed-measure LP is only assembled in dimension 1"}});
      (void)rec;
    } else {
      const TestFunctionBasis<D> basis{cfg_.basis.K, cfg_.basis.M_t};
      const TestFunctionBasis<D> coarse{std::max(1, cfg_.basis.K - 1), cfg_.basis.M_t};
      const OneForm<D> zero{};
      const auto prog = build_lp(sys_, grid_, zero, basis);
      const auto res = solve_lp(prog);
      const auto res_coarse = solve_lp(build_lp(sys_, grid_, zero, coarse));
      const double inv = invariance_defect(sys_, res.mu, grid_.dt());
      const double refine = std::abs(res.value - res_coarse.value);
      const double cross = std::abs(alpha_from_lp(res, zero) - critical().alpha);
      add(rec, "duality_gap", res.solution.duality_gap <= cfg_.tol.tol_lp, res.solution.duality_gap, cfg_.tol.tol_lp);
      add(rec, "duality_gap_coarse", res_coarse.solution.duality_gap <= cfg_.tol.tol_lp,
          res_coarse.solution.duality_gap, cfg_.tol.tol_lp);
      add(rec, "minimizer_invariance", inv <= cfg_.measures.invariance_tol, inv, cfg_.measures.invariance_tol);
      add(rec, "basis_refinement", refine <= cfg_.measures.refinement_tol, refine, cfg_.measures.refinement_tol);
      add(rec, "lp_matches_vi", cross <= cfg_.tol.tol_cross, cross, cfg_.tol.tol_cross);

      std::mt19937_64 rng(cfg_.seed);
      const TestFunctionBasis<D> occ{cfg_.measures.occupation_K, cfg_.basis.M_t};
      CsvTable ot({"orbit", "max_closedness_defect"});
      double worst = 0.0;
      for (int o = 0; o < cfg_.measures.orbits; ++o) {
        const auto mu = random_occupation_measure(sys_, grid_, cfg_.measures.orbit_periods,
                                                  cfg_.measures.orbit_speed, rng);
        const double d = max_closedness_defect(mu, occ);
        worst = std::max(worst, d);
        ot.add({static_cast<double>(o), d});
      }
      add(rec, "occupation_closedness", worst <= cfg_.measures.occupation_tol, worst, cfg_.measures.occupation_tol);

      std::ostringstream lp_text;
      write_lp_format(lp_text, prog.lp);
      write("closed_lp.lp", lp_text.str());
      write("lp_minimizer.csv", measure_csv(res.mu).str());
      write("occupation.csv", ot.str());
      write_json("closed_lp.json", {{"value", res.value},
                                    {"value_coarse", res_coarse.value},
                                    {"alpha_lp", alpha_from_lp(res, zero)},
                                    {"rows", prog.lp.row_count()},
                                    {"variables", prog.lp.variable_count()},
                                    {"iterations", res.solution.iterations},
                                    {"duality_gap", res.solution.duality_gap},
                                    {"invariance_defect", inv},
                                    {"support_size", res.mu.support(1e-9).size()},
                                    {"occupation_max_defect", worst},
                                    {"seed", cfg_.seed}});
    }
  }

  void stage_verify(StageRecord& rec) {
    const auto& p = pair();
    const auto& t = table();
    const double eps = std::ldexp(1.0, -cfg_.verify.eps_level);
    const int N = n_epsilon(t, eps);
    const NodeSet a_eps = a_epsilon(p, eps);
    const auto& chi_f = chi();
    std::mt19937_64 rng(cfg_.seed);
    json reports = json::array();
    int pass_lemma = 0, pass_chi = 0, total = 0;
    auto record = [&](int id, const LemmaReport& r, const char* kind) {
      reports.push_back({{"curve", id}, {"check", kind}, {"source", r.source}, {"lhs", r.lhs}, {"rhs", r.rhs},
                         {"margin", r.margin}, {"tol", r.tol}, {"mu", r.mu}, {"pass", r.pass}});
    };
    for (int i = 0; i < cfg_.verify.curves; ++i) {
      const auto c = random_spline_curve(grid_, rng, cfg_.verify.curve_periods, cfg_.verify.controls);
      const auto r = check_lemma_formule(sys_, p, c, eps, N, a_eps, cfg_.tol.tol_lem);
      const auto rc = check_chi_inequality(sys_, p, chi_f, c, cfg_.tol.tol_lem);
      record(i, r, "lemma");
      record(i, rc, "chi");
      pass_lemma += r.pass;
      pass_chi += rc.pass;
      ++total;
    }
    int dp_pass = 0, dp_total = 0;
    for (int i = 0; i < cfg_.verify.dp_curves && i < static_cast<int>(t.size()); ++i) {
      const auto& probe = t.probes()[static_cast<std::size_t>(i)];
      const auto c = dp_minimizer_curve(dp_, probe.src, probe.dst, 2);
      const auto r = check_lemma_formule(sys_, p, c, eps, N, a_eps, cfg_.tol.tol_lem);
      record(total + i, r, "lemma");
      dp_pass += r.pass;
      ++dp_total;
    }
    add(rec, "lemma_random_curves", pass_lemma == total, pass_lemma, total);
    add(rec, "chi_random_curves", pass_chi == total, pass_chi, total);
    add(rec, "lemma_dp_curves", dp_pass == dp_total, dp_pass, dp_total);
    write_json("lemma_report.json", {{"eps", eps}, {"N", N}, {"A_eps_nodes", a_eps.size()},
                                     {"probe_pairs", cfg_.verify.probe_pairs}, {"probes", t.size()},
                                     {"seed", cfg_.seed}, {"reports", reports}});
    write("chi.csv", field_csv<D>({{"chi", &chi_f}}).str());
  }

  void stage_subsolution(StageRecord& rec) {
    const auto& a = aubry();
    const auto& p = pair();
    const double tol = cfg_.tol.tol_sub;
    const Perturbation<D> P = build_perturbation(grid_, a.nodes, chi());
    const DynamicProgram<D> pdp(sys_.minus_field(P.W), grid_);
    const auto ppair = weak_kam_pair(pdp, vi_, a.nodes);
    const NodeSet dilated = dilate_spatial(grid_, a.nodes, cfg_.subsolution.dilation_cells);
    int attempts = 0;
    const auto cert = subsolution_with_retry(dp_, ppair.u_minus, P.W, dilated, ppair.alpha,
                                             cfg_.subsolution.sigma_cells * grid_.dx(), tol,
                                             cfg_.subsolution.halvings, &attempts);
    add(rec, "certificate_defect", cert.defect_ok, cert.max_defect, tol);
    add(rec, "certificate_strictness", cert.strictness_ok, cert.strictness_margin, -tol);

    // W >= 0, zero on Aubry, bounded by chi.
    double w_min = kInf, w_aubry = 0.0, w_over_chi = -kInf;
    for (int i = 0; i < grid_.nodes(); ++i) {
      w_min = std::min(w_min, P.W[i]);
      w_over_chi = std::max(w_over_chi, P.W[i] - chi()[i]);
    }
    for (int n : a.nodes) w_aubry = std::max(w_aubry, P.W[n]);
    add(rec, "W_nonnegative", w_min >= 0.0, w_min, 0.0);
    add(rec, "W_zero_on_aubry", w_aubry <= 1e-12, w_aubry, 1e-12);
    add(rec, "W_below_chi", w_over_chi <= 0.0, w_over_chi, 0.0);

    // Trivial certificate and the W-transfer identity.
    const auto trivial = certify(dp_, ValueField<D>(grid_, 0.0), critical().alpha, tol);
    const auto exact = certify(dp_, ppair.u_minus, ppair.alpha, tol);
    const auto exact_w = certify(pdp, ppair.u_minus, ppair.alpha, tol);
    double transfer = 0.0;
    for (int i = 0; i < grid_.nodes(); ++i)
      transfer = std::max(transfer, std::abs(exact.defect[i] - (exact_w.defect[i] - P.W[i])));
    add(rec, "W_transfer_identity", transfer <= 1e-9, transfer, 1e-9);
    const auto raised = certify(dp_, cert.u, cert.level + 0.1, tol);
    add(rec, "level_monotonicity", raised.defect_ok, raised.max_defect, tol);

    // No certificate is strict on the Aubry set.
    const auto best = best_strictness<D>({&trivial, &exact, &cert});
    double on_aubry = -kInf;
    for (int n : a.nodes) on_aubry = std::max(on_aubry, best[n]);
    add(rec, "no_strictness_on_aubry", on_aubry <= 2.0 * tol, on_aubry, 2.0 * tol);

    // alpha and the Aubry set are unchanged by W and W/2.
    const auto inv = perturbation_invariance_check(dp_, P.W, critical().alpha, a, win_, vi_, cfg_.tol.tol_cross);
    for (const auto& r : inv.runs) {
      add(rec, "alpha_invariant_scale=" + format_double(r.scale), r.alpha_ok, std::abs(r.alpha - critical().alpha),
          cfg_.tol.tol_cross);
      add(rec, "aubry_invariant_scale=" + format_double(r.scale), r.aubry_ok);
    }
    // Reported only: an uncapped W of amplitude large_factor * max chi.
    double chi_max = 0.0;
    for (double v : chi().data()) chi_max = std::max(chi_max, v);
    const double amp = cfg_.subsolution.large_factor * std::max(chi_max, P.cap);
    const DynamicProgram<D> big(sys_.minus_field(uncapped_profile(grid_, a.nodes, P.radius, amp)), grid_);
    const double alpha_big = amp > 0.0 ? critical_value_vi(big, vi_).alpha : critical().alpha;

    // Birkhoff average of L - W along the calibrated orbit through an Aubry node.
    const int start = a.nodes.front();
    PhasePoint<D> z{grid_.position(grid_.space_of(start)), calibrated_velocity(p.u_minus, start),
                    grid_.time(grid_.slice_of(start))};
    double birkhoff = 0.0;
    try {
      birkhoff = orbit_average(sys_, P.W, z, 10, grid_.v_max) + critical().alpha;
    } catch (const VelocityEscape&) {
      birkhoff = kNaN;
    }
    add(rec, "birkhoff_average", birkhoff >= -tol, birkhoff, -tol);

    ValueField<D> W = P.W;
    write("subsolution.csv",
          field_csv<D>({{"u", &cert.u}, {"defect", &cert.defect}, {"strictness", &cert.strictness}, {"W", &W}}).str());
    std::vector<double> s(cert.strictness.data().begin(), cert.strictness.data().end());
    std::sort(s.begin(), s.end());
    auto q = [&](double f) { return s[static_cast<std::size_t>(f * static_cast<double>(s.size() - 1))]; };
    json runs = json::array();
    for (const auto& r : inv.runs)
      runs.push_back({{"scale", r.scale}, {"alpha", r.alpha}, {"aubry_nodes", r.aubry.nodes.size()},
                      {"alpha_ok", r.alpha_ok}, {"aubry_ok", r.aubry_ok}});
    write_json("subsolution.json",
               {{"level", cert.level},
                {"sigma", cert.sigma},
                {"attempts", attempts},
                {"max_defect", cert.max_defect},
                {"min_defect", -s.back()},
                {"strictness_quantiles", {{"min", s.front()}, {"q25", q(0.25)}, {"median", q(0.5)},
                                          {"q75", q(0.75)}, {"max", s.back()}}},
                {"strictness_margin", cert.strictness_margin},
                {"W_cap", P.cap},
                {"W_radius", P.radius},
                {"invariance", runs},
                {"uncapped_demo", {{"amplitude", amp}, {"alpha", alpha_big},
                                   {"alpha_changed", std::abs(alpha_big - critical().alpha) > cfg_.tol.tol_cross}}},
                {"birkhoff_average", birkhoff},
                {"seed", cfg_.seed}});
  }

  /// Velocity of the minimizing backward step arriving at `node`.
  Vec<D> calibrated_velocity(const ValueField<D>& u, int node) const {
    const int y = grid_.space_of(node);
    const int k = (grid_.slice_of(node) + grid_.nt - 1) % grid_.nt;
    double best = kInf;
    Vec<D> v{};
    for (std::size_t j = 0; j < dp_.candidates().size(); ++j) {
      const double val = u.at(dp_.source(y, static_cast<int>(j)), k) + dp_.step_cost(y, static_cast<int>(j), k);
      if (val < best) {
        best = val;
        v = dp_.candidates()[j].velocity;
      }
    }
    return v;
  }

  void stage_faces(StageRecord& rec) {
    const AlphaExplorer<D> ex(sys_, grid_, alpha_options());
    const double tol = cfg_.tol.tol_face;
    const auto fan = direction_fan<D>(cfg_.faces.directions);
    const auto rep = face_scan<D>(ex, Vec<D>{}, fan, cfg_.faces.deltas, tol);
    std::vector<std::string> header;
    for (int i = 0; i < D; ++i) header.push_back("e" + std::to_string(i));
    for (const char* h : {"delta", "alpha_plus_vi", "alpha_minus_vi", "alpha_plus_lp", "alpha_minus_lp", "certified"})
      header.push_back(h);
    CsvTable fc(header);
    json dirs = json::array();
    bool convex = true;
    for (const auto& fp : rep.directions) {
      for (const auto& row : fp.rows) {
        std::vector<double> r(fp.direction.begin(), fp.direction.end());
        r.insert(r.end(), {row.delta, row.plus.alpha_vi, row.minus.alpha_vi, row.plus.alpha_lp,
                           row.minus.alpha_lp, row.certified ? 1.0 : 0.0});
        fc.add(r);
        convex = convex && row.symmetric_vi >= -tol && (!lp_enabled() || row.symmetric_lp >= -tol);
      }
      add(rec, "slope_consistent", fp.slope_consistent);
      dirs.push_back({{"direction", fp.direction}, {"delta_star", fp.delta_star}, {"slope_tau", fp.slope_tau}});
    }
    add(rec, "alpha_convexity", convex);
    json report = {{"center", rep.center},
                   {"alpha_center_vi", rep.at_center.alpha_vi},
                   {"directions", dirs},
                   {"vect_dim", rep.vect_dim},
                   {"caveat", "G0 is certified through a residual bound, not exact vanishing"}};

    // E_0 witness with a bump form along the first axis.
    OneForm<D> bump;
    bump.bumps.push_back({0, cfg_.faces.bump_lo, cfg_.faces.bump_hi, cfg_.faces.bump_amplitude});
    try {
      const auto e0 = e0_witness_test(ex, bump, aubry().nodes, pair(), table(), tol);
      add(rec, "e0_witness", e0.certified, e0.symmetric_vi, tol);
      report["e0"] = {{"delta", e0.delta}, {"eps", e0.eps}, {"N", e0.N}, {"support_nodes", e0.support_nodes},
                      {"symmetric_vi", e0.symmetric_vi},
                      {"symmetric_lp", lp_enabled() ? json(e0.symmetric_lp) : json(nullptr)},
                      {"slope_tau", e0.slope_tau}, {"certified", e0.certified}};
    } catch (const SupportOverlap& e) {
      report["e0"] = {{"skipped", e.what()}};
    }

    // G_0 witness at c = g0_c e_1 when that class lies in a certified segment.
    const double c = cfg_.faces.g0_c;
    if (!rep.directions.empty() && rep.directions.front().delta_star >= c) {
      const DynamicProgram<D> tdp(sys_.tilted(along_e1(c)), grid_);
      const auto tpair = weak_kam_pair(tdp, vi_, aubry().nodes);
      const auto g0 = g0_witness_build<D>(along_e1(c), pair().alpha, tpair.alpha, pair().u_minus, tpair.u_minus,
                                          aubry().nodes);
      const auto [cls, tau] = g0.corrected.cohomology();
      const double cls_err = std::abs(cls[0] - c) + std::abs(tau - (pair().alpha - tpair.alpha));
      add(rec, "g0_residual", g0.residual <= cfg_.tol.tol_g0, g0.residual, cfg_.tol.tol_g0);
      add(rec, "g0_cohomology", cls_err <= 1e-8, cls_err, 1e-8);
      const auto tilted_aubry = aubry_from_diagonal(grid_, diagonal_barrier(tdp, tpair.alpha, win_), aubry().eps);
      const NodeSet a1 = dilate_spatial(grid_, aubry().nodes, 1);
      const NodeSet b1 = dilate_spatial(grid_, tilted_aubry.nodes, 1);
      const bool stable = std::all_of(tilted_aubry.nodes.begin(), tilted_aubry.nodes.end(),
                                      [&](int n) { return contains(a1, n); }) &&
                          std::all_of(aubry().nodes.begin(), aubry().nodes.end(),
                                      [&](int n) { return contains(b1, n); });
      add(rec, "aubry_stable_in_face", stable);
      report["g0"] = {{"c", c}, {"residual", g0.residual}, {"alpha_c", tpair.alpha},
                      {"cohomology", {cls[0], tau}}, {"aubry_stable", stable}};
    } else {
      report["g0"] = {{"skipped", "class outside every certified segment"}};
    }
    write("faces.csv", fc.str());
    write_json("faces.json", report);
  }

  ExperimentConfig cfg_;
  std::filesystem::path out_;
  SpaceTimeGrid<D> grid_;
  LagrangianSystem<D> sys_;
  DynamicProgram<D> dp_;
  BarrierWindow win_;
  ViOptions vi_;
  RunManifest manifest_;
  std::optional<CriticalValue> critical_;
  std::optional<AubryEstimate> aubry_;
  std::optional<WeakKamPair<D>> pair_;
  std::optional<BarrierTable> table_;
  std::optional<std::vector<EpsilonEntry>> eps_table_;
  std::optional<ValueField<D>> chi_;
};

}  // namespace wkam
