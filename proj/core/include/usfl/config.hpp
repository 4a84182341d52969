// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration loaded from TOML. Unknown keys and type mismatches
// are rejected with the offending key and line.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "usfl/env.hpp"
#include "usfl/policy_eval.hpp"
#include "usfl/problem.hpp"
#include "usfl/trainer.hpp"

namespace usfl {

struct OracleSection {
  int instances = 20;
  InstanceSpec instance;
  OracleOptions options;
  int random_baseline_draws = 1;
};

struct SweepSection {
  std::vector<int> vehicle_counts{5, 10, 15, 20, 25, 30};
  double total_bandwidth = 50e6;  // Hz shared by all vehicles
  double total_es_freq = 12.5e9;  // Hz shared by all vehicles
  double latency_weight = 0.7;
  double energy_weight = 0.3;
  double position_min = 0.0;
  double position_max = 50.0;
};

struct EvalSection {
  std::string checkpoint;  // required by `eval`
  int episodes = 20;
  bool oracle_gap = true;
};

struct ExperimentConfig {
  std::filesystem::path profile_path;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";
  EnvConfig env;
  TrainConfig train;
  OracleSection oracle;
  SweepSection sweep;
  EvalSection eval;

  void validate() const;
};

/// Parses TOML text, applies `overrides` ("dotted.key=value"), and validates.
/// Relative profile paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view toml_text,
                              const std::vector<std::string>& overrides = {},
                              const std::filesystem::path& base_dir = {});

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Effective configuration as TOML, suitable for reloading.
std::string config_to_toml(const ExperimentConfig& config);

}  // namespace usfl
