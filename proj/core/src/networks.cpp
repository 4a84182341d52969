// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/networks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "usfl/error.hpp"

namespace usfl::nn {

void ActorSpec::validate() const {
  if (trunk.input_dim < 1 || trunk.hidden1 < 1 || trunk.hidden2 < 1 ||
      trunk.residual_blocks < 0) {
    throw InvalidArgument("actor: invalid trunk sizes");
  }
  if (x_choices < 1 || y_choices < 1) throw InvalidArgument("actor: empty discrete head");
  if (attention_tokens * attention_dim != trunk.hidden2) {
    throw InvalidArgument("actor: attention tokens * dim must equal the trunk width");
  }
  if (!(log_std_min < log_std_max)) throw InvalidArgument("actor: empty log-std range");
}

// SplitSpace -------------------------------------------------------------------

SplitSpace SplitSpace::from_profile(const ModelProfile& profile) {
  SplitSpace s;
  s.firsts = profile.first_split_candidates();
  s.seconds = profile.second_split_candidates();
  s.allowed.assign(s.firsts.size(), std::vector<bool>(s.seconds.size(), false));
  for (const auto& p : profile.allowed_split_pairs()) {
    s.allowed[static_cast<size_t>(s.index_of_first(p.x))]
             [static_cast<size_t>(s.index_of_second(p.y))] = true;
  }
  return s;
}

int SplitSpace::index_of_first(int x) const {
  const auto it = std::find(firsts.begin(), firsts.end(), x);
  if (it == firsts.end()) throw InvalidArgument("first split " + std::to_string(x) + " unknown");
  return static_cast<int>(it - firsts.begin());
}

int SplitSpace::index_of_second(int y) const {
  const auto it = std::find(seconds.begin(), seconds.end(), y);
  if (it == seconds.end()) {
    throw InvalidArgument("second split " + std::to_string(y) + " unknown");
  }
  return static_cast<int>(it - seconds.begin());
}

SplitPair SplitSpace::pair(int x_index, int y_index) const {
  return SplitPair{firsts.at(static_cast<size_t>(x_index)),
                   seconds.at(static_cast<size_t>(y_index))};
}

Matrix SplitSpace::x_mask() const {
  return Matrix::Ones(1, static_cast<Eigen::Index>(firsts.size()));
}

Matrix SplitSpace::y_mask(int x_index) const {
  const auto& row = allowed.at(static_cast<size_t>(x_index));
  Matrix m(1, static_cast<Eigen::Index>(row.size()));
  for (size_t j = 0; j < row.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = row[j] ? 1.0 : 0.0;
  return m;
}

// Initialization ---------------------------------------------------------------

void he_initialize(ParameterSet& params, std::uint64_t seed,
                   const std::vector<std::string>& head_prefixes, double head_scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (size_t i = 0; i < params.count(); ++i) {
    auto& p = params.at(i);
    const auto& name = p.name();
    if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
      p.value().setZero();
      continue;
    }
    double s = std::sqrt(2.0 / static_cast<double>(p.value().rows()));
    for (const auto& prefix : head_prefixes) {
      if (name.rfind(prefix, 0) == 0) s *= head_scale;
    }
    for (Eigen::Index k = 0; k < p.value().size(); ++k) p.value()(k) = s * normal(rng);
  }
}

// Trunk ------------------------------------------------------------------------

Trunk::Dense Trunk::make(ParameterSet& params, const std::string& name, int in, int out) {
  Dense d;
  d.w = &params.add(name + ".w", Matrix::Zero(in, out));
  d.b = &params.add(name + ".b", Matrix::Zero(1, out));
  return d;
}

Var Trunk::apply(Tape& tape, const Dense& d, const Var& x) {
  return linear(x, tape.param(*d.w), tape.param(*d.b));
}

Trunk::Trunk(const TrunkSpec& spec, const std::string& prefix, ParameterSet& params) {
  in_ = make(params, prefix + ".in", spec.input_dim, spec.hidden1);
  mid_ = make(params, prefix + ".mid", spec.hidden1, spec.hidden2);
  for (int k = 0; k < spec.residual_blocks; ++k) {
    const auto base = prefix + ".res" + std::to_string(k);
    blocks_.emplace_back(make(params, base + ".fc1", spec.hidden2, spec.hidden2),
                         make(params, base + ".fc2", spec.hidden2, spec.hidden2));
  }
}

Var Trunk::forward(Tape& tape, const Var& x) const {
  Var h = leaky_relu(apply(tape, in_, x), kLeakySlope);
  h = leaky_relu(apply(tape, mid_, h), kLeakySlope);
  for (const auto& [a, b] : blocks_) {
    h = add(h, apply(tape, b, leaky_relu(apply(tape, a, h), kLeakySlope)));
  }
  return h;
}

// Actor ------------------------------------------------------------------------

Actor::Actor(ActorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  trunk_ = Trunk(spec_.trunk, "trunk", params_);
  const int d = spec_.attention_dim;
  wq_ = &params_.add("attn.wq", Matrix::Zero(d, d));
  wk_ = &params_.add("attn.wk", Matrix::Zero(d, d));
  wv_ = &params_.add("attn.wv", Matrix::Zero(d, d));
  const int h = spec_.trunk.hidden2;
  heads_.push_back(&params_.add("head.x.w", Matrix::Zero(h, spec_.x_choices)));
  heads_.push_back(&params_.add("head.x.b", Matrix::Zero(1, spec_.x_choices)));
  heads_.push_back(&params_.add("head.y.w", Matrix::Zero(h, spec_.y_choices)));
  heads_.push_back(&params_.add("head.y.b", Matrix::Zero(1, spec_.y_choices)));
  heads_.push_back(&params_.add("head.bw.w", Matrix::Zero(h, 2)));
  heads_.push_back(&params_.add("head.bw.b", Matrix::Zero(1, 2)));
  heads_.push_back(&params_.add("head.freq.w", Matrix::Zero(h, 2)));
  heads_.push_back(&params_.add("head.freq.b", Matrix::Zero(1, 2)));
}

void Actor::initialize(std::uint64_t seed, double head_scale) {
  he_initialize(params_, seed, {"head."}, head_scale);
  // Start both Gaussian heads at log-std 0 when the range allows it.
  const double mid = 0.5 * (spec_.log_std_min + spec_.log_std_max);
  const double half = 0.5 * (spec_.log_std_max - spec_.log_std_min);
  const double raw = std::atanh(std::clamp(-mid / half, -0.999, 0.999));
  heads_[5]->value()(0, 1) = raw;
  heads_[7]->value()(0, 1) = raw;
}

ActorGraph Actor::forward(Tape& tape, const Matrix& states) {
  if (states.cols() != spec_.trunk.input_dim) {
    throw InvalidArgument("actor: expected state width " + std::to_string(spec_.trunk.input_dim) +
                          ", got " + std::to_string(states.cols()));
  }
  Var h = trunk_.forward(tape, tape.constant(states));
  h = add(h, attention(h, tape.param(*wq_), tape.param(*wk_), tape.param(*wv_),
                       spec_.attention_tokens, spec_.attention_dim));
  auto head = [&](size_t k) {
    return linear(h, tape.param(*heads_[k]), tape.param(*heads_[k + 1]));
  };
  ActorGraph g;
  g.x_logits = head(0);
  g.y_logits = head(2);
  const Var bw = head(4);
  const Var fr = head(6);
  // log-std = mid + half * tanh(raw) stays inside [min, max] and keeps a
  // gradient at the bounds.
  const double mid = 0.5 * (spec_.log_std_min + spec_.log_std_max);
  const double half = 0.5 * (spec_.log_std_max - spec_.log_std_min);
  auto bounded = [&](const Var& raw) { return shift(scale(nn::tanh(raw), half), mid); };
  g.bw_mean = column(bw, 0);
  g.bw_log_std = bounded(column(bw, 1));
  g.freq_mean = column(fr, 0);
  g.freq_log_std = bounded(column(fr, 1));
  return g;
}

ActorOutput Actor::evaluate(const Eigen::VectorXd& state, const Matrix& x_mask,
                            const Matrix& y_mask) {
  Tape tape;
  const auto g = forward(tape, state.transpose());
  const Matrix xm = x_mask.size() ? x_mask : Matrix::Ones(1, spec_.x_choices);
  const Matrix ym = y_mask.size() ? y_mask : Matrix::Ones(1, spec_.y_choices);
  ActorOutput out;
  out.discrete_x = masked_softmax(g.x_logits.value(), xm).row(0).transpose();
  out.discrete_y = masked_softmax(g.y_logits.value(), ym).row(0).transpose();
  out.cont_bandwidth = {g.bw_mean.scalar(), std::exp(g.bw_log_std.scalar())};
  out.cont_freq = {g.freq_mean.scalar(), std::exp(g.freq_log_std.scalar())};
  return out;
}

// Critic -----------------------------------------------------------------------

Critic::Critic(TrunkSpec spec) : spec_(spec) {
  if (spec_.input_dim < 1) throw InvalidArgument("critic: input_dim must be >= 1");
  trunk_ = Trunk(spec_, "trunk", params_);
  out_w_ = &params_.add("head.v.w", Matrix::Zero(spec_.hidden2, 1));
  out_b_ = &params_.add("head.v.b", Matrix::Zero(1, 1));
}

void Critic::initialize(std::uint64_t seed, double head_scale) {
  he_initialize(params_, seed, {"head."}, head_scale);
}

Var Critic::forward(Tape& tape, const Matrix& states) {
  if (states.cols() != spec_.input_dim) {
    throw InvalidArgument("critic: expected state width " + std::to_string(spec_.input_dim) +
                          ", got " + std::to_string(states.cols()));
  }
  const Var h = trunk_.forward(tape, tape.constant(states));
  return linear(h, tape.param(*out_w_), tape.param(*out_b_));
}

double Critic::value(const Eigen::VectorXd& state) {
  Tape tape;
  return forward(tape, state.transpose()).scalar();
}

}  // namespace usfl::nn
