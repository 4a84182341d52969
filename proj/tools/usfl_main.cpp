// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "usfl/error.hpp"
#include "usfl/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"U-shaped split federated learning resource allocation"};
  app.set_version_flag("--version", usfl::kVersion);
  app.require_subcommand(1);

  usfl::RunRequest request;
  std::uint64_t seed = 0;
  std::string out;
  int episodes = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"train", "Train the multi-agent PPO allocator"},
      {"eval", "Evaluate a checkpoint greedily and against the oracle"},
      {"oracle", "Solve seeded instances by grid search and score baselines"},
      {"sweep", "Tabulate payloads, SAE overhead, density and split-pair costs"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", request.config_path, "TOML experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Root seed");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--episodes", episodes, "Episode count (train or eval)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--set", request.overrides, "Override, dotted.key=value")
        ->take_all();
  }

  CLI11_PARSE(app, argc, argv);

  CLI::App* chosen = app.get_subcommands().front();
  request.command = chosen->get_name();
  if (chosen->count("--seed") > 0) request.seed = seed;
  if (chosen->count("--out") > 0) request.out_dir = out;
  if (chosen->count("--episodes") > 0) request.episodes = episodes;

  try {
    const auto dir = usfl::run_command(request, std::cout);
    std::cout << "outputs in " << dir.string() << "\n";
  } catch (const usfl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
