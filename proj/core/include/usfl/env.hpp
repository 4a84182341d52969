// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Episodic MDP over a fleet of vehicles sharing one edge server. Each step
// every active vehicle runs one training round under the chosen allocation.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "usfl/cost.hpp"
#include "usfl/profile.hpp"
#include "usfl/radio.hpp"

namespace usfl {

enum class StepMode { realized_max, fixed };

struct EnvConfig {
  int vu_count = 5;
  double task_rate = 100.0;  // Poisson mean of tasks per vehicle
  int max_steps = 50;
  double distance_min = 10.0;
  double distance_max = 100.0;
  double max_bandwidth_per_vu = 10e6;
  double max_es_freq_per_vu = 2.5e9;
  double total_bandwidth = 0.0;  // <= 0: vu_count * max_bandwidth_per_vu
  double total_es_freq = 0.0;    // <= 0: vu_count * max_es_freq_per_vu
  double energy_budget = 50.0;   // Joule per vehicle per episode
  double rho = -1.0;             // required
  StepMode step_mode = StepMode::realized_max;
  double step_duration = 1.0;    // used when step_mode == fixed
  double min_fraction = 1e-3;    // lower bound of squashed resource fractions
  bool with_sae = true;

  // Per-vehicle templates; bandwidth and ES share come from the action.
  ComputeParams compute;
  RadioParams radio;
  double es_height = 10.0;
  double coverage_diameter = 200.0;
  double speed = 10.0;

  double bandwidth_total() const;
  double es_freq_total() const;
  void validate() const;
};

struct MdpState {
  std::vector<int> remaining_tasks;
  std::vector<double> remaining_exec_time;
  std::vector<double> remaining_energy;
  std::vector<double> distance;

  int vu_count() const { return static_cast<int>(remaining_tasks.size()); }
  static constexpr int kFeaturesPerVu = 4;
  /// (tasks, exec time, energy, distance) of one vehicle.
  std::vector<double> local_features(int vu) const;
  /// Concatenation of local_features over all vehicles.
  std::vector<double> global_features() const;
};

struct MdpAction {
  std::vector<double> bandwidth;
  std::vector<double> es_freq;
  std::vector<SplitPair> splits;

  size_t size() const { return splits.size(); }
  friend bool operator==(const MdpAction&, const MdpAction&) = default;
};

/// Unconstrained network outputs for one step. Split indices refer to the
/// profile's first/second-split candidate lists.
struct RawAction {
  std::vector<double> bandwidth_z;
  std::vector<double> freq_z;
  std::vector<SplitPair> splits;
};

/// floor + (1 - floor) * sigmoid(z)
double squash_fraction(double z, double floor);

/// Squashes continuous outputs into per-vehicle maxima, then projects.
MdpAction squash_action(const RawAction& raw, const EnvConfig& config,
                        const ModelProfile& profile);

/// Clamps resources to [0, per-vehicle max], rescales a resource by
/// total / sum when its sum exceeds the total, and maps each split to an
/// allowed pair (nearest first split, then nearest second split for it).
/// Idempotent.
MdpAction project_action(const MdpAction& action, const EnvConfig& config,
                         const ModelProfile& profile);

/// Negated sum of E_i + rho * T_i; vehicles that did not run carry zero cost.
double step_reward(std::span<const CostBreakdown> costs, double rho);

struct StepResult {
  MdpState next;
  double reward = 0.0;
  bool done = false;
  std::vector<CostBreakdown> costs;  // zero for vehicles that did not run
  std::vector<bool> ran;             // vehicle executed a round this step
  std::vector<bool> completed;       // ... and finished it within its energy
};

class VehicularEnv {
 public:
  VehicularEnv(EnvConfig config, std::shared_ptr<const ModelProfile> profile);

  const EnvConfig& config() const { return config_; }
  const ModelProfile& profile() const { return *profile_; }
  const MdpState& state() const { return state_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }
  double elapsed() const { return elapsed_; }
  bool frozen(int vu) const { return frozen_.at(static_cast<size_t>(vu)); }

  /// Per-task time at an equal resource split and the default split pair,
  /// evaluated at distance d.
  double nominal_task_time(double d) const;

  MdpState reset(std::uint64_t seed);
  /// `action` must already be projected (throws InvalidArgument otherwise).
  StepResult step(const MdpAction& action);

 private:
  bool active(size_t i) const;
  bool any_active() const;

  EnvConfig config_;
  std::shared_ptr<const ModelProfile> profile_;
  MdpState state_;
  std::vector<MobilityTrace> traces_;
  std::vector<bool> frozen_;
  double elapsed_ = 0.0;
  int steps_ = 0;
  bool done_ = true;
};

/// Writes "episode,step,vu,bandwidth_hz,es_freq_hz,split_x,split_y,reward,
/// latency_s,energy_j" rows for one step.
void write_trace_header(std::ostream& os);
void write_trace_rows(std::ostream& os, int episode, int step, const MdpAction& action,
                      const StepResult& result);

}  // namespace usfl
