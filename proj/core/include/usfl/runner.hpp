// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Subcommand drivers behind the command-line tool. Each run owns an output
// directory holding its CSV artifacts and a manifest.json that moves from
// "running" to "succeeded" or "failed".

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "usfl/config.hpp"

namespace usfl {

extern const char* const kVersion;

struct RunRequest {
  std::string command;  // train | eval | oracle | sweep
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> episodes;
  std::vector<std::string> overrides;
};

/// Applies the command-line flags on top of the loaded configuration.
ExperimentConfig resolve_config(const RunRequest& request);

class Manifest {
 public:
  Manifest(std::filesystem::path dir, std::string command, const ExperimentConfig& config);

  void add_output(const std::filesystem::path& file);
  void succeed();
  void fail(const std::string& message);
  const std::filesystem::path& path() const { return path_; }

 private:
  void write(const std::string& status, const std::string& error);

  std::filesystem::path dir_;
  std::filesystem::path path_;
  std::string command_;
  std::uint64_t seed_;
  std::string config_toml_;
  std::string started_at_;
  std::vector<std::filesystem::path> outputs_;
};

/// Each driver writes into `out` and returns the files it produced.
std::vector<std::filesystem::path> run_train(const ExperimentConfig& config,
                                             const std::filesystem::path& out, std::ostream& log);
std::vector<std::filesystem::path> run_eval(const ExperimentConfig& config,
                                            const std::filesystem::path& out, std::ostream& log);
std::vector<std::filesystem::path> run_oracle(const ExperimentConfig& config,
                                              const std::filesystem::path& out, std::ostream& log);
std::vector<std::filesystem::path> run_sweep(const ExperimentConfig& config,
                                             const std::filesystem::path& out, std::ostream& log);

/// Resolves the config, runs the command under a manifest and returns the
/// output directory. Failures are recorded in the manifest and rethrown.
std::filesystem::path run_command(const RunRequest& request, std::ostream& log);

}  // namespace usfl
