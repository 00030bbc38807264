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
 * @file cli.hpp
 * @brief Command-line front end. Exit codes: 0 all checks passed, 2 bad
 * configuration, 3 numerical failure, 4 a check failed. Codes 2 and 3 also
 * leave an error.json in the output directory.
 */

#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "wkam/pipeline.hpp"

namespace wkam {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitGate = 4 };

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"alpha",       "aubry",        "barrier",   "faces",
                                                 "subsolution", "verify-lemma", "closed-lp", "all"};
  return names;
}

struct CliOptions {
  std::string subcommand;
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

namespace detail {

inline void write_error(const std::filesystem::path& out, const std::string& kind, const std::string& message,
                        const std::string& path, int code) {
  json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  if (!path.empty()) j["field"] = path;
  try {
    atomic_write(out / "error.json", j.dump(2) + "\n");
  } catch (const std::exception&) {
    // The report is best effort; the exit code still carries the outcome.
  }
}

inline std::string error_kind(const Error& e) {
  if (dynamic_cast<const NotConverged*>(&e)) return "NotConverged";
  if (dynamic_cast<const WindowExhausted*>(&e)) return "WindowExhausted";
  if (dynamic_cast<const BoxSaturation*>(&e)) return "BoxSaturation";
  if (dynamic_cast<const VelocityEscape*>(&e)) return "VelocityEscape";
  if (dynamic_cast<const EmptyAubry*>(&e)) return "EmptyAubry";
  if (dynamic_cast<const Infeasible*>(&e)) return "Infeasible";
  if (dynamic_cast<const Unbounded*>(&e)) return "Unbounded";
  if (dynamic_cast<const MollificationTooCoarse*>(&e)) return "MollificationTooCoarse";
  if (dynamic_cast<const SupportOverlap*>(&e)) return "SupportOverlap";
  return "NumericalError";
}

}  // namespace detail

/// Runs one subcommand with parsed options; returns the exit code.
inline int run(const CliOptions& opt, std::ostream& log = std::cerr) {
  // --out, then WKAM_OUT, then the configured directory.
  const char* env = std::getenv("WKAM_OUT");
  const bool env_set = env && *env;
  std::filesystem::path out = opt.out ? std::filesystem::path(*opt.out) : env_set ? std::filesystem::path(env) : "out";
  try {
    ExperimentConfig cfg = load_config(opt.config);
    if (!opt.out && !env_set) out = cfg.output;
    if (opt.seed) {
      cfg.seed = *opt.seed;
      cfg.source["seed"] = *opt.seed;
    }
    set_worker_count(opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency()));
    std::filesystem::create_directories(out);
    bool passed = false;
    auto go = [&](auto pipeline) {
      pipeline.run(opt.subcommand);
      passed = pipeline.manifest().passed();
      for (const auto& s : pipeline.manifest().stages)
        for (const auto& c : s.checks)
          if (!c.passed) log << "check failed: " << s.name << "/" << c.name << " value=" << c.value
                             << " bound=" << c.bound << "\n";
    };
    if (cfg.system.dim == 1)
      go(Pipeline<1>(cfg, out));
    else
      go(Pipeline<2>(cfg, out));
    return passed ? kExitOk : kExitGate;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    detail::write_error(out, "ConfigError", e.what(), e.path(), kExitConfig);
    return kExitConfig;
  } catch (const Error& e) {
    log << "numerical error: " << e.what() << "\n";
    detail::write_error(out, detail::error_kind(e), e.what(), "", kExitNumerical);
    return kExitNumerical;
  }
}

/// Parses argv (`wkam <subcommand> --config PATH [--out DIR] [--threads N] [--seed U64]`).
inline int run_cli(int argc, char** argv) {
  CLI::App app{"Weak KAM and Mather-theory toolkit for time-periodic Lagrangians"};
  app.require_subcommand(1);
  CliOptions opt;
  std::string out;
  std::uint64_t seed = 0;
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " stage" + (name == "all" ? "s" : ""));
    sub->add_option("--config", opt.config, "configuration file (JSON)")->required();
    sub->add_option("--out", out, "output directory (env WKAM_OUT also works)");
    sub->add_option("--threads", opt.threads, "worker threads (default: available parallelism)");
    sub->add_option("--seed", seed, "seed override");
    sub->callback([&, name, sub] {
      opt.subcommand = name;
      if (sub->count("--out")) opt.out = out;
      if (sub->count("--seed")) opt.seed = seed;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  return run(opt);
}

}  // namespace wkam
