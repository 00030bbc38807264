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
 * @file config.hpp
 * @brief Experiment configuration: a JSON object of nested tables, validated
 * field by field. Every error names the offending path (for example
 * "grid.nx"). The full schema is listed in the README.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "wkam/core.hpp"

namespace wkam {

using json = nlohmann::json;

struct TrigTermSpec {
  std::vector<int> k;
  int m = 0;
  double a_cos = 0.0;
  double a_sin = 0.0;
};

struct SystemSpec {
  std::string family = "pendulum";  // free | pendulum | trig
  int dim = 1;
  double constant = 0.0;            // constant part of V for "trig"
  std::vector<TrigTermSpec> terms;  // V for "trig"
  double shift = 0.0;               // L + shift
};

struct GridSpec {
  int nx = 64;
  int nt = 16;
  int nv = 65;
  double v_max = 4.0;
};

struct Tolerances {
  double tol_alpha = 1e-9;
  double tol_lp = 1e-9;   // duality gap gate
  double tol_cross = 1e-2;
  double tol_sub = 1e-2;
  double tol_face = 3e-2;
  double tol_lem = 1e-9;  // floor under 5 x the quadrature error estimate
  double tol_h = 1e-2;
  double tol_g0 = 5e-2;
  double tol_dom = 1e-9;
};

struct Windows {
  int n_lo = 8;
  int n_hi = 64;
  int max_iters = 4096;
};

struct BasisSpec {
  int K = 3;
  int M_t = 2;
};

struct AlphaStage {
  std::vector<double> c_values{0.0, 0.25, 0.5, 1.0};  // spatial classes along e_1 (d = 2: c e_1)
  bool use_lp = true;
};

struct FacesStage {
  std::vector<double> deltas{0.1, 0.3, 0.5};
  int directions = 16;  // d = 2 only
  double bump_lo = 0.3;
  double bump_hi = 0.7;
  double bump_amplitude = 1.0;
  double g0_c = 0.3;
};

struct VerifyStage {
  int eps_level = 3;  // eps = 2^-eps_level
  int n_max = 10;
  int curves = 100;
  int probe_pairs = 64;
  double curve_periods = 2.0;
  int controls = 8;
  int dp_curves = 20;
};

struct SubsolutionStage {
  double sigma_cells = 2.0;
  int halvings = 3;
  int dilation_cells = 2;
  double large_factor = 10.0;  // demo W amplitude = factor * max chi
};

struct MeasuresStage {
  int orbits = 10;
  int orbit_periods = 50;
  double orbit_speed = 1.5;
  int occupation_K = 2;
  double occupation_tol = 5e-2;
  double invariance_tol = 0.1;
  double refinement_tol = 1e-2;
};

struct ExperimentConfig {
  SystemSpec system;
  GridSpec grid;
  Tolerances tol;
  Windows windows;
  BasisSpec basis;
  std::uint64_t seed = 7;
  std::string output = "out";
  AlphaStage alpha;
  FacesStage faces;
  VerifyStage verify;
  SubsolutionStage subsolution;
  MeasuresStage measures;
  json source;  // the parsed document, for hashing
};

namespace detail {

inline const json& require_table(const json& parent, const std::string& key, const std::string& path) {
  if (!parent.contains(key)) throw ConfigError(path, "missing required table");
  const json& t = parent.at(key);
  if (!t.is_object()) throw ConfigError(path, "must be a table");
  return t;
}

template <class T>
void read(const json& table, const std::string& key, const std::string& prefix, T& out) {
  if (!table.contains(key)) return;
  const std::string path = prefix + "." + key;
  try {
    out = table.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "wrong type");
  }
}

inline void positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path, "must be > 0");
}

inline void at_least(long long v, long long lo, const std::string& path) {
  if (v < lo) throw ConfigError(path, "must be >= " + std::to_string(lo));
}

}  // namespace detail

/// Parses and validates a configuration document.
inline ExperimentConfig parse_config(const json& doc) {
  using detail::read;
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");
  ExperimentConfig c;
  c.source = doc;

  const json& sys = detail::require_table(doc, "system", "system");
  read(sys, "family", "system", c.system.family);
  read(sys, "dim", "system", c.system.dim);
  read(sys, "constant", "system", c.system.constant);
  read(sys, "shift", "system", c.system.shift);
  if (c.system.family != "free" && c.system.family != "pendulum" && c.system.family != "trig")
    throw ConfigError("system.family", "expected free, pendulum or trig");
  if (c.system.dim != 1 && c.system.dim != 2) throw ConfigError("system.dim", "must be 1 or 2");
  if (sys.contains("potential")) {
    const json& terms = sys.at("potential");
    if (!terms.is_array()) throw ConfigError("system.potential", "must be an array");
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const std::string p = "system.potential[" + std::to_string(i) + "]";
      TrigTermSpec t;
      read(terms[i], "k", p, t.k);
      read(terms[i], "m", p, t.m);
      read(terms[i], "cos", p, t.a_cos);
      read(terms[i], "sin", p, t.a_sin);
      if (static_cast<int>(t.k.size()) != c.system.dim)
        throw ConfigError(p + ".k", "length must equal system.dim");
      c.system.terms.push_back(t);
    }
  }
  if (c.system.family == "trig" && c.system.terms.empty() && c.system.constant == 0.0)
    throw ConfigError("system.potential", "trig family needs coefficients");

  const json& grid = detail::require_table(doc, "grid", "grid");
  read(grid, "nx", "grid", c.grid.nx);
  read(grid, "nt", "grid", c.grid.nt);
  read(grid, "nv", "grid", c.grid.nv);
  read(grid, "v_max", "grid", c.grid.v_max);
  detail::at_least(c.grid.nx, 4, "grid.nx");
  detail::at_least(c.grid.nt, 2, "grid.nt");
  detail::at_least(c.grid.nv, 3, "grid.nv");
  detail::positive(c.grid.v_max, "grid.v_max");
  if (c.grid.v_max / c.grid.nt < 1.0 / c.grid.nx - 1e-12)
    throw ConfigError("grid", "v_max * dt must be at least one cell");

  if (doc.contains("tolerances")) {
    const json& t = detail::require_table(doc, "tolerances", "tolerances");
    read(t, "tol_alpha", "tolerances", c.tol.tol_alpha);
    read(t, "tol_lp", "tolerances", c.tol.tol_lp);
    read(t, "tol_cross", "tolerances", c.tol.tol_cross);
    read(t, "tol_sub", "tolerances", c.tol.tol_sub);
    read(t, "tol_face", "tolerances", c.tol.tol_face);
    read(t, "tol_lem", "tolerances", c.tol.tol_lem);
    read(t, "tol_h", "tolerances", c.tol.tol_h);
    read(t, "tol_g0", "tolerances", c.tol.tol_g0);
    read(t, "tol_dom", "tolerances", c.tol.tol_dom);
    for (auto [v, name] : {std::pair{c.tol.tol_alpha, "tol_alpha"}, {c.tol.tol_lp, "tol_lp"},
                           {c.tol.tol_cross, "tol_cross"}, {c.tol.tol_sub, "tol_sub"},
                           {c.tol.tol_face, "tol_face"}, {c.tol.tol_lem, "tol_lem"},
                           {c.tol.tol_h, "tol_h"}, {c.tol.tol_g0, "tol_g0"}, {c.tol.tol_dom, "tol_dom"}})
      detail::positive(v, std::string("tolerances.") + name);
  }
  if (doc.contains("windows")) {
    const json& w = detail::require_table(doc, "windows", "windows");
    read(w, "n_lo", "windows", c.windows.n_lo);
    read(w, "n_hi", "windows", c.windows.n_hi);
    read(w, "max_iters", "windows", c.windows.max_iters);
  }
  detail::at_least(c.windows.n_lo, 1, "windows.n_lo");
  if (c.windows.n_hi < 2 * c.windows.n_lo) throw ConfigError("windows.n_hi", "must be >= 2 * n_lo");
  detail::at_least(c.windows.max_iters, 1, "windows.max_iters");
  if (doc.contains("basis")) {
    const json& b = detail::require_table(doc, "basis", "basis");
    read(b, "K", "basis", c.basis.K);
    read(b, "M_t", "basis", c.basis.M_t);
  }
  detail::at_least(c.basis.K, 1, "basis.K");
  detail::at_least(c.basis.M_t, 0, "basis.M_t");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer())
      throw ConfigError("seed", "must be an unsigned integer");
    c.seed = doc.at("seed").get<std::uint64_t>();
  }
  read(doc, "output", "", c.output);

  if (doc.contains("alpha")) {
    const json& a = detail::require_table(doc, "alpha", "alpha");
    read(a, "c_values", "alpha", c.alpha.c_values);
    read(a, "use_lp", "alpha", c.alpha.use_lp);
  }
  if (doc.contains("faces")) {
    const json& f = detail::require_table(doc, "faces", "faces");
    read(f, "deltas", "faces", c.faces.deltas);
    read(f, "directions", "faces", c.faces.directions);
    read(f, "bump_lo", "faces", c.faces.bump_lo);
    read(f, "bump_hi", "faces", c.faces.bump_hi);
    read(f, "bump_amplitude", "faces", c.faces.bump_amplitude);
    read(f, "g0_c", "faces", c.faces.g0_c);
    for (double d : c.faces.deltas) detail::positive(d, "faces.deltas");
    if (!(c.faces.bump_lo < c.faces.bump_hi) || c.faces.bump_hi - c.faces.bump_lo > 1.0)
      throw ConfigError("faces.bump_hi", "need bump_lo < bump_hi <= bump_lo + 1");
  }
  if (doc.contains("verify")) {
    const json& v = detail::require_table(doc, "verify", "verify");
    read(v, "eps_level", "verify", c.verify.eps_level);
    read(v, "n_max", "verify", c.verify.n_max);
    read(v, "curves", "verify", c.verify.curves);
    read(v, "probe_pairs", "verify", c.verify.probe_pairs);
    read(v, "curve_periods", "verify", c.verify.curve_periods);
    read(v, "controls", "verify", c.verify.controls);
    read(v, "dp_curves", "verify", c.verify.dp_curves);
    detail::at_least(c.verify.n_max, 0, "verify.n_max");
    detail::at_least(c.verify.controls, 3, "verify.controls");
    detail::positive(c.verify.curve_periods, "verify.curve_periods");
  }
  if (doc.contains("subsolution")) {
    const json& s = detail::require_table(doc, "subsolution", "subsolution");
    read(s, "sigma_cells", "subsolution", c.subsolution.sigma_cells);
    read(s, "halvings", "subsolution", c.subsolution.halvings);
    read(s, "dilation_cells", "subsolution", c.subsolution.dilation_cells);
    read(s, "large_factor", "subsolution", c.subsolution.large_factor);
  }
  if (doc.contains("measures")) {
    const json& m = detail::require_table(doc, "measures", "measures");
    read(m, "orbits", "measures", c.measures.orbits);
    read(m, "orbit_periods", "measures", c.measures.orbit_periods);
    read(m, "orbit_speed", "measures", c.measures.orbit_speed);
    read(m, "occupation_K", "measures", c.measures.occupation_K);
    read(m, "occupation_tol", "measures", c.measures.occupation_tol);
    read(m, "invariance_tol", "measures", c.measures.invariance_tol);
    read(m, "refinement_tol", "measures", c.measures.refinement_tol);
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("", "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

template <int D>
SpaceTimeGrid<D> make_grid(const GridSpec& g) {
  SpaceTimeGrid<D> out;
  out.nx = g.nx;
  out.nt = g.nt;
  out.nv = g.nv;
  out.v_max = g.v_max;
  return out;
}

template <int D>
LagrangianSystem<D> make_system(const SystemSpec& s) {
  LagrangianSystem<D> sys;
  if (s.family == "free") {
    sys = LagrangianSystem<D>::free_particle();
  } else if (s.family == "pendulum") {
    sys = LagrangianSystem<D>::pendulum();
  } else {
    TrigPoly<D> v;
    v.constant = s.constant;
    for (const auto& t : s.terms) {
      IVec<D> k{};
      for (int i = 0; i < D; ++i) k[i] = t.k[static_cast<std::size_t>(i)];
      v.terms.push_back({k, t.m, t.a_cos, t.a_sin});
    }
    sys = LagrangianSystem<D>::mechanical(std::move(v));
  }
  return s.shift != 0.0 ? sys.shifted(s.shift) : sys;
}

}  // namespace wkam
