// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/runner.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <ostream>

#include <json.hpp>

#include "usfl/analysis.hpp"
#include "usfl/checkpoint.hpp"
#include "usfl/csv.hpp"
#include "usfl/error.hpp"
#include "usfl/policy_eval.hpp"
#include "usfl/profile.hpp"
#include "usfl/rng.hpp"
#include "usfl/trainer.hpp"

#ifndef USFL_VERSION
#define USFL_VERSION "0.0.0"
#endif

namespace usfl {

const char* const kVersion = USFL_VERSION;

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::shared_ptr<const ModelProfile> profile_for(const ExperimentConfig& config) {
  return std::make_shared<const ModelProfile>(load_profile(config.profile_path));
}

std::vector<ProblemInstance> oracle_instances(const ExperimentConfig& config,
                                              std::shared_ptr<const ModelProfile> profile) {
  return make_instance_set(config.env, std::move(profile), config.oracle.instance,
                           derive_seed(config.seed, seed_stream::instances),
                           config.oracle.instances);
}

std::string split_label(SplitPair p) { return std::to_string(p.x) + "-" + std::to_string(p.y); }

long long as_cell(int v) { return static_cast<long long>(v); }

}  // namespace

ExperimentConfig resolve_config(const RunRequest& request) {
  ExperimentConfig config = load_config(request.config_path, request.overrides);
  if (request.seed) config.seed = *request.seed;
  if (request.out_dir) config.out_dir = *request.out_dir;
  if (request.episodes) {
    if (*request.episodes < 1) throw ConfigError("--episodes must be >= 1");
    if (request.command == "eval") {
      config.eval.episodes = *request.episodes;
    } else {
      config.train.episodes = *request.episodes;
    }
  }
  config.validate();
  return config;
}

Manifest::Manifest(fs::path dir, std::string command, const ExperimentConfig& config)
    : dir_(std::move(dir)),
      path_(dir_ / "manifest.json"),
      command_(std::move(command)),
      seed_(config.seed),
      config_toml_(config_to_toml(config)),
      started_at_(utc_now()) {
  write("running", "");
}

void Manifest::add_output(const fs::path& file) { outputs_.push_back(file); }

void Manifest::succeed() { write("succeeded", ""); }

void Manifest::fail(const std::string& message) { write("failed", message); }

void Manifest::write(const std::string& status, const std::string& error) {
  nlohmann::json j;
  j["command"] = command_;
  j["status"] = status;
  j["version"] = kVersion;
  j["seed"] = seed_;
  j["started_at"] = started_at_;
  j["finished_at"] = status == "running" ? nlohmann::json(nullptr) : nlohmann::json(utc_now());
  j["config"] = config_toml_;
  nlohmann::json outputs = nlohmann::json::array();
  for (const fs::path& f : outputs_) {
    std::error_code ec;
    const auto size = fs::file_size(f, ec);
    outputs.push_back({{"path", fs::relative(f, dir_).generic_string()},
                       {"bytes", ec ? 0 : static_cast<std::uint64_t>(size)}});
  }
  j["outputs"] = std::move(outputs);
  j["error"] = error.empty() ? nlohmann::json(nullptr) : nlohmann::json(error);

  const fs::path tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, path_);
}

std::vector<fs::path> run_train(const ExperimentConfig& config, const fs::path& out,
                                std::ostream& log) {
  auto profile = profile_for(config);
  Trainer trainer(config.env, config.train, profile, config.seed);

  const fs::path metrics_path = out / "metrics.csv";
  std::ofstream metrics(metrics_path);
  if (!metrics) throw Error("cannot write " + metrics_path.string());
  write_metrics_header(metrics);

  const int total = config.train.episodes;
  const int every = std::max(1, total / 20);
  double window_latency = 0.0;
  int window = 0;
  trainer.train(
      [&](const EpisodeMetrics& m) {
        write_metrics_row(metrics, m);
        window_latency += m.mean_latency_s;
        ++window;
        if ((m.episode + 1) % every == 0 || m.episode + 1 == total) {
          log << "episode " << m.episode + 1 << "/" << total
              << " mean_latency_s=" << window_latency / window << " lr=" << m.lr << "\n";
          window_latency = 0.0;
          window = 0;
        }
      },
      out);
  metrics.close();

  std::vector<fs::path> files{metrics_path};
  for (const auto& entry : fs::directory_iterator(out)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("checkpoint_") && name.ends_with(".json")) files.push_back(entry.path());
  }
  std::sort(files.begin() + 1, files.end());
  return files;
}

std::vector<fs::path> run_eval(const ExperimentConfig& config, const fs::path& out,
                               std::ostream& log) {
  if (config.eval.checkpoint.empty()) {
    throw ConfigError("eval needs a checkpoint: --set eval.checkpoint=PATH");
  }
  auto profile = profile_for(config);
  MultiAgentPolicy policy =
      MultiAgentPolicy::from_checkpoint(read_checkpoint(config.eval.checkpoint), *profile);
  if (!policy.shared() && policy.vu_count() != config.env.vu_count) {
    throw ConfigError("checkpoint holds " + std::to_string(policy.vu_count()) +
                      " actors but env.vu_count is " + std::to_string(config.env.vu_count));
  }

  std::vector<fs::path> files;
  CsvWriter costs(out / "eval_costs.csv",
                  {"episode", "step", "vu", "split_x", "split_y", "bandwidth_hz", "es_freq_hz",
                   "t_cmp_a", "t_sem_enc", "t_sem_dec", "t_cmp_b", "t_cmp_c", "t_com_fa",
                   "t_com_fb", "t_com_bc", "t_com_bb", "e_cmp", "e_com", "latency_s",
                   "energy_j"});
  CsvWriter summary(out / "eval_summary.csv",
                    {"episode", "steps", "reward", "mean_latency_s", "mean_energy_j"});

  VehicularEnv env(config.env, profile);
  const std::uint64_t env_root = derive_seed(derive_seed(config.seed, seed_stream::env), 1u << 20);
  for (int ep = 0; ep < config.eval.episodes; ++ep) {
    MdpState state = env.reset(derive_seed(env_root, static_cast<std::uint64_t>(ep)));
    double reward = 0.0, latency = 0.0, energy = 0.0;
    int rounds = 0, step = 0;
    while (!env.done()) {
      const MdpAction action = policy.greedy_action(state, config.env, *profile);
      const StepResult r = env.step(action);
      reward += r.reward;
      for (size_t i = 0; i < r.costs.size(); ++i) {
        if (!r.ran[i]) continue;
        const CostBreakdown& c = r.costs[i];
        costs.row({as_cell(ep), as_cell(step), as_cell(static_cast<int>(i)),
                   as_cell(action.splits[i].x), as_cell(action.splits[i].y),
                   action.bandwidth[i], action.es_freq[i], c.t_cmp_a, c.t_sem_enc,
                   c.t_sem_dec, c.t_cmp_b, c.t_cmp_c, c.t_com_fa, c.t_com_fb, c.t_com_bc,
                   c.t_com_bb, c.e_cmp, c.e_com, c.t_total, c.e_total});
        latency += c.t_total;
        energy += c.e_total;
        ++rounds;
      }
      state = r.next;
      ++step;
    }
    const double n = std::max(rounds, 1);
    summary.row({as_cell(ep), as_cell(step), reward, latency / n, energy / n});
    log << "eval episode " << ep << " reward=" << reward << " mean_latency_s=" << latency / n
        << "\n";
  }
  files.push_back(costs.path());
  files.push_back(summary.path());

  if (config.eval.oracle_gap) {
    const auto instances = oracle_instances(config, profile);
    const auto rows = policy_oracle_gap(policy, instances, config.env, config.oracle.instance,
                                        config.oracle.options);
    CsvWriter gap(out / "policy_gap.csv",
                  {"instance", "policy_objective", "oracle_objective", "relative_gap",
                   "policy_feasible", "policy_allocation", "oracle_allocation"});
    int within = 0;
    for (const GapRow& r : rows) {
      gap.row({r.id, r.policy_objective, r.oracle_objective, r.relative_gap,
               as_cell(r.policy_feasible ? 1 : 0), r.policy_allocation, r.oracle_allocation});
      if (r.relative_gap <= 0.25) ++within;
    }
    log << "policy within 25% of the optimum on " << within << "/" << rows.size()
        << " instances\n";
    files.push_back(gap.path());
  }
  return files;
}

std::vector<fs::path> run_oracle(const ExperimentConfig& config, const fs::path& out,
                                 std::ostream& log) {
  auto profile = profile_for(config);
  const auto instances = oracle_instances(config, profile);
  CsvWriter csv(out / "oracle.csv", {"instance", "method", "objective", "feasible", "violations",
                                     "allocation", "evaluations", "wall_time_s"});
  const std::uint64_t baseline_root = derive_seed(config.seed, seed_stream::instances + 100);

  for (size_t k = 0; k < instances.size(); ++k) {
    const ProblemInstance& inst = instances[k];
    const auto start = std::chrono::steady_clock::now();
    const OracleResult best = brute_force_solve(inst, config.oracle.options);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    csv.row({inst.id, std::string("oracle"), best.objective, as_cell(1), std::string(),
             format_allocation(best.allocation), static_cast<long long>(best.evaluated), secs});

    std::vector<BaselineSpec> baselines{BaselineSpec{}};
    for (int d = 0; d < config.oracle.random_baseline_draws; ++d) {
      BaselineSpec b;
      b.kind = BaselineKind::random;
      b.seed = derive_seed(baseline_root, k * 1000 + static_cast<std::uint64_t>(d));
      baselines.push_back(b);
    }
    for (SplitPair pair : profile->allowed_split_pairs()) {
      BaselineSpec b;
      b.kind = BaselineKind::fixed_split;
      b.split = pair;
      baselines.push_back(b);
    }
    for (const BaselineSpec& b : baselines) {
      const auto t0 = std::chrono::steady_clock::now();
      const Allocation alloc = baseline_allocate(inst, b);
      const auto costs = evaluate_allocation(inst, alloc);
      const double objective = evaluate_objective(costs, inst.limits.weight_rho);
      const FeasibilityReport report = check_feasibility(
          alloc, costs, inst.limits, inst.stay_times(), profile->total_layers());
      const double dt =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      csv.row({inst.id, baseline_name(b), objective, as_cell(report.feasible() ? 1 : 0),
               report.feasible() ? std::string() : report.describe(),
               format_allocation(alloc), static_cast<long long>(1), dt});
    }
    log << inst.id << " oracle objective " << best.objective << " in " << secs << " s\n";
  }
  return {csv.path()};
}

std::vector<fs::path> run_sweep(const ExperimentConfig& config, const fs::path& out,
                                std::ostream& log) {
  auto profile = profile_for(config);
  const std::uint64_t seed = derive_seed(config.seed, seed_stream::instances);
  std::vector<fs::path> files;

  {
    CsvWriter csv(out / "smashed_bytes.csv", {"cut_layer", "bytes_without_sae", "bytes_with_sae"});
    for (const auto& r : smashed_bytes_by_cut(*profile)) {
      csv.row({as_cell(r.cut_layer), r.bytes_without_sae, r.bytes_with_sae});
    }
    files.push_back(csv.path());
  }
  {
    CsvWriter csv(out / "sae_overhead.csv",
                  {"vehicles", "cut_layer", "encode_time_s", "decode_time_s",
                   "uplink_time_without_sae_s", "uplink_time_with_sae_s"});
    for (const auto& r : sae_overhead_by_cut(config.env, profile, config.sweep, seed)) {
      csv.row({as_cell(r.vehicles), as_cell(r.cut_layer), r.encode_time_s, r.decode_time_s,
               r.uplink_time_without_sae_s, r.uplink_time_with_sae_s});
    }
    files.push_back(csv.path());
  }
  {
    CsvWriter csv(out / "latency_by_density.csv",
                  {"vehicles", "with_sae", "communication_latency_s", "computation_latency_s",
                   "round_latency_s"});
    for (const auto& r : latency_by_density(config.env, profile, config.sweep, seed)) {
      csv.row({as_cell(r.vehicles), as_cell(r.with_sae ? 1 : 0), r.communication_latency_s,
               r.computation_latency_s, r.round_latency_s});
    }
    files.push_back(csv.path());
  }
  {
    CsvWriter csv(out / "split_pairs.csv",
                  {"vehicles", "split", "total_energy_j", "max_latency_s",
                   "weighted_consumption"});
    for (const auto& r : consumption_by_split(config.env, profile, config.sweep, seed)) {
      csv.row({as_cell(r.vehicles), split_label(r.split), r.total_energy_j, r.max_latency_s, r.weighted});
    }
    files.push_back(csv.path());
  }
  log << "sweep wrote " << files.size() << " tables to " << out.string() << "\n";
  return files;
}

fs::path run_command(const RunRequest& request, std::ostream& log) {
  using Driver = std::vector<fs::path> (*)(const ExperimentConfig&, const fs::path&, std::ostream&);
  Driver driver = nullptr;
  if (request.command == "train") driver = run_train;
  if (request.command == "eval") driver = run_eval;
  if (request.command == "oracle") driver = run_oracle;
  if (request.command == "sweep") driver = run_sweep;
  if (driver == nullptr) throw ConfigError("unknown command '" + request.command + "'");

  const ExperimentConfig config = resolve_config(request);
  const fs::path out = config.out_dir;
  fs::create_directories(out);
  Manifest manifest(out, request.command, config);
  try {
    for (const fs::path& f : driver(config, out, log)) manifest.add_output(f);
    manifest.succeed();
  } catch (const std::exception& e) {
    manifest.fail(e.what());
    throw;
  }
  return out;
}

}  // namespace usfl
