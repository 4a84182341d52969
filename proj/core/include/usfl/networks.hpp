// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Actor and critic networks.
//
// Trunk: dense(in, 256) -> LeakyReLU -> dense(256, 128) -> LeakyReLU, then
// two residual blocks h + dense(LeakyReLU(dense(h))) at width 128. The actor
// adds h + attention(h), reading h as 16 tokens of width 8, and four heads:
// logits over first-split candidates, logits over second-split candidates,
// and (mean, log-std) Gaussians for the bandwidth and ES-frequency
// pre-squash values. The critic ends in dense(128, 1).

#pragma once

#include <cstdint>
#include <vector>

#include "usfl/profile.hpp"
#include "usfl/tape.hpp"

namespace usfl::nn {

inline constexpr double kLeakySlope = 0.01;

struct TrunkSpec {
  int input_dim = 4;
  int hidden1 = 256;
  int hidden2 = 128;
  int residual_blocks = 2;

  friend bool operator==(const TrunkSpec&, const TrunkSpec&) = default;
};

struct ActorSpec {
  TrunkSpec trunk;
  int x_choices = 4;
  int y_choices = 4;
  int attention_tokens = 16;  // attention_tokens * attention_dim == hidden2
  int attention_dim = 8;
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  void validate() const;
  friend bool operator==(const ActorSpec&, const ActorSpec&) = default;
};

/// Discrete split choices derived from a profile's allowed pairs. Indices
/// into `firsts` / `seconds` are the actor's discrete actions.
struct SplitSpace {
  std::vector<int> firsts;
  std::vector<int> seconds;
  std::vector<std::vector<bool>> allowed;  // [x index][y index]

  static SplitSpace from_profile(const ModelProfile& profile);
  int index_of_first(int x) const;
  int index_of_second(int y) const;
  SplitPair pair(int x_index, int y_index) const;
  /// 1 x |firsts|, all ones.
  Matrix x_mask() const;
  /// 1 x |seconds| validity of second splits for the given first split.
  Matrix y_mask(int x_index) const;
};

/// Tape handles of one actor forward pass over a batch.
struct ActorGraph {
  Var x_logits;
  Var y_logits;
  Var bw_mean;
  Var bw_log_std;  // bounded to [log_std_min, log_std_max]
  Var freq_mean;
  Var freq_log_std;
};

struct Gaussian {
  double mean = 0.0;
  double std = 1.0;
};

struct ActorOutput {
  Eigen::VectorXd discrete_x;
  Eigen::VectorXd discrete_y;
  Gaussian cont_bandwidth;
  Gaussian cont_freq;
};

class Trunk {
 public:
  Trunk() = default;
  Trunk(const TrunkSpec& spec, const std::string& prefix, ParameterSet& params);
  Var forward(Tape& tape, const Var& x) const;

 private:
  struct Dense {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
  };
  Dense in_, mid_;
  std::vector<std::pair<Dense, Dense>> blocks_;
  static Dense make(ParameterSet& params, const std::string& name, int in, int out);
  static Var apply(Tape& tape, const Dense& d, const Var& x);
};

class Actor {
 public:
  explicit Actor(ActorSpec spec);

  const ActorSpec& spec() const { return spec_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// He fan-in normal initialization; head layers are scaled by head_scale
  /// and the Gaussian heads start at log-std 0.
  void initialize(std::uint64_t seed, double head_scale = 0.01);

  ActorGraph forward(Tape& tape, const Matrix& states);
  /// Single-state evaluation. y_mask (1 x y_choices) restricts the second
  /// split; empty means unrestricted.
  ActorOutput evaluate(const Eigen::VectorXd& state, const Matrix& x_mask = {},
                       const Matrix& y_mask = {});

 private:
  ActorSpec spec_;
  ParameterSet params_;
  Trunk trunk_;
  Parameter* wq_ = nullptr;
  Parameter* wk_ = nullptr;
  Parameter* wv_ = nullptr;
  std::vector<Parameter*> heads_;  // x_w, x_b, y_w, y_b, bw_w, bw_b, f_w, f_b
};

class Critic {
 public:
  explicit Critic(TrunkSpec spec);

  const TrunkSpec& spec() const { return spec_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  void initialize(std::uint64_t seed, double head_scale = 0.01);
  /// n x 1 values.
  Var forward(Tape& tape, const Matrix& states);
  double value(const Eigen::VectorXd& state);

 private:
  TrunkSpec spec_;
  ParameterSet params_;
  Trunk trunk_;
  Parameter* out_w_ = nullptr;
  Parameter* out_b_ = nullptr;
};

/// He fan-in normal initialization of every parameter named "*.w"; biases
/// are zeroed. Parameters whose name starts with a head prefix get the
/// extra scale.
void he_initialize(ParameterSet& params, std::uint64_t seed,
                   const std::vector<std::string>& head_prefixes, double head_scale);

}  // namespace usfl::nn
