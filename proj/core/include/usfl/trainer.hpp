// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-actor, single-critic PPO over VehicularEnv. Each vehicle has its own
// actor reading that vehicle's normalized local state (or one shared actor);
// the critic reads the concatenation of all local states.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "usfl/checkpoint.hpp"
#include "usfl/env.hpp"
#include "usfl/networks.hpp"
#include "usfl/normalizer.hpp"
#include "usfl/optimizer.hpp"

namespace usfl {

enum class CriticTarget { monte_carlo, gae };

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.1;
  double entropy_coeff = 0.005;
  double lr = 1e-4;
  double lr_decay = 0.9999;  // per update
  int episodes = 30000;
  int buffer_size = 1024;
  int batch_size = 256;
  int reuse = 5;
  double grad_clip_norm = 1.0;
  double epsilon_start = 0.1;
  double epsilon_end = 0.01;
  bool normalize_advantages = true;
  bool scale_rewards = false;  // divide rewards by the running std of the discounted return
  CriticTarget critic_target = CriticTarget::monte_carlo;
  bool shared_actor = false;
  int checkpoint_every = 0;  // episodes; 0 = final checkpoint only
  int hidden1 = 256;
  int hidden2 = 128;
  int residual_blocks = 2;
  double head_init_scale = 0.01;

  void validate() const;
  int updates_per_flush() const { return reuse * (buffer_size / batch_size); }
  /// Exponential decay from epsilon_start to epsilon_end over the run.
  double epsilon_at(int episode) const;
};

/// The actors plus the state normalizer they were trained with.
class MultiAgentPolicy {
 public:
  MultiAgentPolicy(nn::ActorSpec spec, int vu_count, bool shared, nn::SplitSpace space);

  int actor_count() const { return static_cast<int>(actors_.size()); }
  bool shared() const { return shared_; }
  int vu_count() const { return vu_count_; }
  nn::Actor& actor_for(int vu);
  nn::Actor& actor(int k) { return *actors_.at(static_cast<size_t>(k)); }
  const nn::SplitSpace& split_space() const { return space_; }
  const nn::ActorSpec& spec() const { return spec_; }
  RunningNormalizer& normalizer() { return normalizer_; }
  const RunningNormalizer& normalizer() const { return normalizer_; }

  void initialize(std::uint64_t seed, double head_scale);

  /// Normalized local features, one row per vehicle.
  nn::Matrix local_inputs(const MdpState& state) const;
  /// Argmax splits and Gaussian means; projected for `config`.
  MdpAction greedy_action(const MdpState& state, const EnvConfig& config,
                          const ModelProfile& profile);

  CheckpointData to_checkpoint() const;
  /// Loads into a policy built with the same architecture.
  void restore(const CheckpointData& data);
  static MultiAgentPolicy from_checkpoint(const CheckpointData& data,
                                          const ModelProfile& profile);

 private:
  nn::ActorSpec spec_;
  int vu_count_;
  bool shared_;
  nn::SplitSpace space_;
  std::vector<std::unique_ptr<nn::Actor>> actors_;
  RunningNormalizer normalizer_;
};

struct EpisodeMetrics {
  int episode = 0;
  int steps = 0;
  double reward = 0.0;
  double mean_latency_s = 0.0;
  double mean_energy_j = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double lr = 0.0;
  double epsilon = 0.0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const EpisodeMetrics& m);

struct UpdateStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
};

class Trainer {
 public:
  Trainer(EnvConfig env_config, TrainConfig train_config,
          std::shared_ptr<const ModelProfile> profile, std::uint64_t seed);

  const TrainConfig& config() const { return train_; }
  const EnvConfig& env_config() const { return env_config_; }
  MultiAgentPolicy& policy() { return policy_; }
  nn::Critic& critic() { return critic_; }
  long updates() const { return updates_; }
  long flushes() const { return flushes_; }
  double current_lr() const;
  size_t buffered_steps() const { return buffer_.size(); }

  /// Collects one episode and flushes the buffer once it holds
  /// buffer_size steps.
  EpisodeMetrics run_episode(int episode);

  /// Runs config().episodes episodes. `on_episode` sees every metrics row;
  /// checkpoints go to checkpoint_dir when set.
  std::vector<EpisodeMetrics> train(
      const std::function<void(const EpisodeMetrics&)>& on_episode = {},
      const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

  /// Runs updates_per_flush() minibatch updates on the buffer and clears it.
  UpdateStats flush();

  CheckpointData to_checkpoint() const;

 private:
  struct Step {
    nn::Matrix local;        // vu x features, normalized
    Eigen::VectorXd global;  // normalized concatenation
    std::vector<int> x, y;
    std::vector<double> z_bw, z_freq, behavior_logp;
    std::vector<double> active;
    double eps = 0.0;  // exploration rate the step was collected with
    double reward = 0.0;
    double value = 0.0;
    double advantage = 0.0;
    double target = 0.0;
  };

  struct Sampled {
    int x = 0;
    int y = 0;
    double z_bw = 0.0;
    double z_freq = 0.0;
    double logp = 0.0;
  };

  Sampled sample(nn::Actor& actor, const nn::Matrix& input, double eps);
  void finish_episode(std::vector<Step>& episode);
  UpdateStats update(const std::vector<size_t>& batch);

  EnvConfig env_config_;
  TrainConfig train_;
  std::shared_ptr<const ModelProfile> profile_;
  VehicularEnv env_;
  MultiAgentPolicy policy_;
  nn::Critic critic_;
  std::vector<std::unique_ptr<nn::Adam>> actor_opt_;
  std::unique_ptr<nn::Adam> critic_opt_;
  std::uint64_t seed_;
  std::mt19937_64 explore_rng_;
  std::mt19937_64 batch_rng_;
  RunningNormalizer reward_stats_{1};
  double running_return_ = 0.0;
  std::vector<Step> buffer_;
  long updates_ = 0;
  long flushes_ = 0;
  UpdateStats last_stats_;
};

/// log((1 - eps) p + eps u) for a probability p and alternative density u.
double mixture_log_prob(double log_p, double log_u, double eps);
/// log of the logistic density at z: log(s (1 - s)), s = sigmoid(z).
double log_logistic_density(double z);

}  // namespace usfl
