// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "usfl/error.hpp"
#include "usfl/returns.hpp"
#include "usfl/rng.hpp"

namespace usfl {

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("train: gamma must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw InvalidArgument("train: gae_lambda must lie in [0, 1]");
  }
  if (!(clip_eps > 0.0)) throw InvalidArgument("train: clip_eps must be > 0");
  if (!(entropy_coeff >= 0.0)) throw InvalidArgument("train: entropy_coeff must be >= 0");
  if (!(lr > 0.0) || !(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw InvalidArgument("train: lr must be > 0 and lr_decay in (0, 1]");
  }
  if (episodes < 1 || buffer_size < 1 || batch_size < 1 || reuse < 1) {
    throw InvalidArgument("train: episodes and buffer/batch/reuse sizes must be positive");
  }
  if (batch_size > buffer_size) throw InvalidArgument("train: batch_size exceeds buffer_size");
  if (!(grad_clip_norm > 0.0)) throw InvalidArgument("train: grad_clip_norm must be > 0");
  if (!(epsilon_start >= 0.0 && epsilon_start < 1.0 && epsilon_end >= 0.0 &&
        epsilon_end < 1.0)) {
    throw InvalidArgument("train: epsilon values must lie in [0, 1)");
  }
  if (checkpoint_every < 0) throw InvalidArgument("train: checkpoint_every must be >= 0");
}

double TrainConfig::epsilon_at(int episode) const {
  if (episodes <= 1 || epsilon_start <= 0.0 || epsilon_end <= 0.0) {
    return episodes <= 1 ? epsilon_start : epsilon_start + (epsilon_end - epsilon_start) *
                                                               episode / (episodes - 1.0);
  }
  const double frac = std::clamp(episode / (episodes - 1.0), 0.0, 1.0);
  return epsilon_start * std::pow(epsilon_end / epsilon_start, frac);
}

double mixture_log_prob(double log_p, double log_u, double eps) {
  if (eps <= 0.0) return log_p;
  const double a = std::log1p(-eps) + log_p;
  const double b = std::log(eps) + log_u;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_logistic_density(double z) {
  // log s + log(1 - s) = -softplus(-z) - softplus(z)
  auto softplus = [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
  return -softplus(-z) - softplus(z);
}

// MultiAgentPolicy ---------------------------------------------------------------

MultiAgentPolicy::MultiAgentPolicy(nn::ActorSpec spec, int vu_count, bool shared,
                                   nn::SplitSpace space)
    : spec_(std::move(spec)), vu_count_(vu_count), shared_(shared), space_(std::move(space)),
      normalizer_(MdpState::kFeaturesPerVu) {
  if (vu_count < 1) throw InvalidArgument("policy: vu_count must be >= 1");
  spec_.x_choices = static_cast<int>(space_.firsts.size());
  spec_.y_choices = static_cast<int>(space_.seconds.size());
  spec_.trunk.input_dim = MdpState::kFeaturesPerVu;
  const int n = shared ? 1 : vu_count;
  for (int k = 0; k < n; ++k) actors_.push_back(std::make_unique<nn::Actor>(spec_));
}

nn::Actor& MultiAgentPolicy::actor_for(int vu) {
  if (shared_) return *actors_.front();
  if (vu < 0 || vu >= actor_count()) {
    throw InvalidArgument("policy has no actor for vehicle " + std::to_string(vu));
  }
  return *actors_[static_cast<size_t>(vu)];
}

void MultiAgentPolicy::initialize(std::uint64_t seed, double head_scale) {
  for (size_t k = 0; k < actors_.size(); ++k) actors_[k]->initialize(derive_seed(seed, k), head_scale);
}

nn::Matrix MultiAgentPolicy::local_inputs(const MdpState& state) const {
  nn::Matrix out(state.vu_count(), MdpState::kFeaturesPerVu);
  for (int i = 0; i < state.vu_count(); ++i) {
    const auto f = state.local_features(i);
    out.row(i) = normalizer_.normalize(Eigen::Map<const Eigen::VectorXd>(f.data(), f.size()))
                     .transpose();
  }
  return out;
}

MdpAction MultiAgentPolicy::greedy_action(const MdpState& state, const EnvConfig& config,
                                          const ModelProfile& profile) {
  const nn::Matrix inputs = local_inputs(state);
  RawAction raw;
  for (int i = 0; i < state.vu_count(); ++i) {
    nn::Tape tape;
    const auto g = actor_for(i).forward(tape, inputs.row(i));
    const nn::Matrix px = nn::masked_softmax(g.x_logits.value(), space_.x_mask());
    Eigen::Index xi = 0;
    px.row(0).maxCoeff(&xi);
    const nn::Matrix py =
        nn::masked_softmax(g.y_logits.value(), space_.y_mask(static_cast<int>(xi)));
    Eigen::Index yi = 0;
    py.row(0).maxCoeff(&yi);
    raw.splits.push_back(space_.pair(static_cast<int>(xi), static_cast<int>(yi)));
    raw.bandwidth_z.push_back(g.bw_mean.scalar());
    raw.freq_z.push_back(g.freq_mean.scalar());
  }
  return squash_action(raw, config, profile);
}

namespace {

std::string join(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

int meta_int(const CheckpointData& d, const std::string& key) {
  const auto it = d.metadata.find(key);
  if (it == d.metadata.end()) throw CheckpointError("checkpoint metadata lacks " + key);
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint metadata " + key + " is not an integer");
  }
}

double meta_double(const CheckpointData& d, const std::string& key) {
  const auto it = d.metadata.find(key);
  if (it == d.metadata.end()) throw CheckpointError("checkpoint metadata lacks " + key);
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint metadata " + key + " is not a number");
  }
}

std::string exact(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

CheckpointData MultiAgentPolicy::to_checkpoint() const {
  CheckpointData d;
  d.metadata["kind"] = "policy";
  d.metadata["vu_count"] = std::to_string(vu_count_);
  d.metadata["shared_actor"] = shared_ ? "1" : "0";
  d.metadata["hidden1"] = std::to_string(spec_.trunk.hidden1);
  d.metadata["hidden2"] = std::to_string(spec_.trunk.hidden2);
  d.metadata["residual_blocks"] = std::to_string(spec_.trunk.residual_blocks);
  d.metadata["attention_tokens"] = std::to_string(spec_.attention_tokens);
  d.metadata["attention_dim"] = std::to_string(spec_.attention_dim);
  d.metadata["log_std_min"] = exact(spec_.log_std_min);
  d.metadata["log_std_max"] = exact(spec_.log_std_max);
  d.metadata["first_splits"] = join(space_.firsts);
  d.metadata["second_splits"] = join(space_.seconds);
  for (size_t k = 0; k < actors_.size(); ++k) {
    append_parameters(d, "actor" + std::to_string(k), actors_[k]->params());
  }
  nn::Matrix count(1, 1);
  count(0, 0) = static_cast<double>(normalizer_.count());
  d.arrays.push_back({"normalizer/count", count});
  d.arrays.push_back({"normalizer/mean", normalizer_.mean()});
  d.arrays.push_back({"normalizer/m2", normalizer_.m2()});
  return d;
}

void MultiAgentPolicy::restore(const CheckpointData& data) {
  for (size_t k = 0; k < actors_.size(); ++k) {
    restore_parameters(data, "actor" + std::to_string(k), actors_[k]->params());
  }
  const auto* count = data.find("normalizer/count");
  const auto* mean = data.find("normalizer/mean");
  const auto* m2 = data.find("normalizer/m2");
  if (!count || !mean || !m2) throw CheckpointError("checkpoint has no normalizer state");
  if (mean->value.rows() != normalizer_.dim() || mean->value.cols() != 1 ||
      m2->value.rows() != normalizer_.dim() || m2->value.cols() != 1) {
    throw CheckpointError("shape mismatch for array normalizer/mean");
  }
  normalizer_.restore(static_cast<std::uint64_t>(count->value(0, 0)), mean->value.col(0),
                      m2->value.col(0));
}

MultiAgentPolicy MultiAgentPolicy::from_checkpoint(const CheckpointData& data,
                                                   const ModelProfile& profile) {
  nn::ActorSpec spec;
  spec.trunk.hidden1 = meta_int(data, "hidden1");
  spec.trunk.hidden2 = meta_int(data, "hidden2");
  spec.trunk.residual_blocks = meta_int(data, "residual_blocks");
  spec.attention_tokens = meta_int(data, "attention_tokens");
  spec.attention_dim = meta_int(data, "attention_dim");
  spec.log_std_min = meta_double(data, "log_std_min");
  spec.log_std_max = meta_double(data, "log_std_max");
  auto space = nn::SplitSpace::from_profile(profile);
  if (data.metadata.at("first_splits") != join(space.firsts) ||
      data.metadata.at("second_splits") != join(space.seconds)) {
    throw CheckpointError("checkpoint split candidates do not match profile " + profile.name());
  }
  MultiAgentPolicy policy(spec, meta_int(data, "vu_count"), meta_int(data, "shared_actor") != 0,
                          std::move(space));
  policy.restore(data);
  return policy;
}

// Metrics ----------------------------------------------------------------------

void write_metrics_header(std::ostream& os) {
  os << "episode,reward,mean_latency_s,mean_energy_J,actor_loss,critic_loss,entropy,lr,epsilon\n";
}

void write_metrics_row(std::ostream& os, const EpisodeMetrics& m) {
  const auto old = os.precision(12);
  os << m.episode << ',' << m.reward << ',' << m.mean_latency_s << ',' << m.mean_energy_j << ','
     << m.actor_loss << ',' << m.critic_loss << ',' << m.entropy << ',' << m.lr << ','
     << m.epsilon << '\n';
  os.precision(old);
}

// Trainer ----------------------------------------------------------------------

namespace {

nn::ActorSpec actor_spec(const TrainConfig& c) {
  nn::ActorSpec s;
  s.trunk.hidden1 = c.hidden1;
  s.trunk.hidden2 = c.hidden2;
  s.trunk.residual_blocks = c.residual_blocks;
  // Keep the token width at 8 and derive the token count from the trunk width.
  s.attention_dim = 8;
  s.attention_tokens = c.hidden2 / 8;
  return s;
}

double uniform01_open(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v = 0.0;
  do {
    v = u(rng);
  } while (v <= 0.0);
  return v;
}

int sample_index(const nn::Matrix& probs, double u) {
  double acc = 0.0;
  int last = 0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    if (probs(0, j) <= 0.0) continue;
    last = static_cast<int>(j);
    acc += probs(0, j);
    if (u < acc) return last;
  }
  return last;
}

int valid_count(const nn::Matrix& mask) { return static_cast<int>((mask.array() > 0.5).count()); }

int uniform_valid(const nn::Matrix& mask, std::mt19937_64& rng) {
  const int n = valid_count(mask);
  std::uniform_int_distribution<int> pick(0, n - 1);
  int k = pick(rng);
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    if (mask(0, j) > 0.5 && k-- == 0) return static_cast<int>(j);
  }
  return 0;
}

}  // namespace

Trainer::Trainer(EnvConfig env_config, TrainConfig train_config,
                 std::shared_ptr<const ModelProfile> profile, std::uint64_t seed)
    : env_config_(std::move(env_config)),
      train_((train_config.validate(), std::move(train_config))),
      profile_(std::move(profile)),
      env_(env_config_, profile_),
      policy_(actor_spec(train_), env_config_.vu_count, train_.shared_actor,
              nn::SplitSpace::from_profile(*profile_)),
      critic_(nn::TrunkSpec{env_config_.vu_count * MdpState::kFeaturesPerVu, train_.hidden1,
                            train_.hidden2, train_.residual_blocks}),
      seed_(seed),
      explore_rng_(derive_seed(seed, seed_stream::exploration)),
      batch_rng_(derive_seed(seed, seed_stream::minibatch)) {
  const auto init = derive_seed(seed, seed_stream::init);
  policy_.initialize(init, train_.head_init_scale);
  critic_.initialize(derive_seed(init, 1000), train_.head_init_scale);
  for (int k = 0; k < policy_.actor_count(); ++k) {
    actor_opt_.push_back(std::make_unique<nn::Adam>(policy_.actor(k).params()));
  }
  critic_opt_ = std::make_unique<nn::Adam>(critic_.params());
}

double Trainer::current_lr() const {
  return train_.lr * std::pow(train_.lr_decay, static_cast<double>(updates_));
}

Trainer::Sampled Trainer::sample(nn::Actor& actor, const nn::Matrix& input, double eps) {
  const auto& space = policy_.split_space();
  nn::Tape tape;
  const auto g = actor.forward(tape, input);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Sampled s;

  const nn::Matrix xmask = space.x_mask();
  const nn::Matrix px = nn::masked_softmax(g.x_logits.value(), xmask);
  s.x = u(explore_rng_) < eps ? uniform_valid(xmask, explore_rng_)
                              : sample_index(px, u(explore_rng_));
  s.logp += mixture_log_prob(std::log(px(0, s.x)), -std::log(valid_count(xmask)), eps);

  const nn::Matrix ymask = space.y_mask(s.x);
  const nn::Matrix py = nn::masked_softmax(g.y_logits.value(), ymask);
  s.y = u(explore_rng_) < eps ? uniform_valid(ymask, explore_rng_)
                              : sample_index(py, u(explore_rng_));
  s.logp += mixture_log_prob(std::log(py(0, s.y)), -std::log(valid_count(ymask)), eps);

  auto gaussian = [&](const nn::Var& mean, const nn::Var& log_std, double& z) {
    const double mu = mean.scalar();
    const double ls = log_std.scalar();
    if (u(explore_rng_) < eps) {
      const double v = uniform01_open(explore_rng_);
      z = std::log(v) - std::log1p(-v);
    } else {
      z = mu + std::exp(ls) * normal(explore_rng_);
    }
    const double d = (z - mu) / std::exp(ls);
    const double lp = -0.5 * d * d - ls - 0.5 * std::log(2.0 * std::numbers::pi);
    return mixture_log_prob(lp, log_logistic_density(z), eps);
  };
  s.logp += gaussian(g.bw_mean, g.bw_log_std, s.z_bw);
  s.logp += gaussian(g.freq_mean, g.freq_log_std, s.z_freq);
  return s;
}

void Trainer::finish_episode(std::vector<Step>& episode) {
  if (episode.empty()) return;
  std::vector<double> rewards, values;
  for (const auto& s : episode) {
    rewards.push_back(s.reward);
    values.push_back(s.value);
  }
  const auto returns = discounted_returns(rewards, train_.gamma);
  const auto adv = gae_advantages(rewards, values, train_.gamma, train_.gae_lambda);
  for (size_t t = 0; t < episode.size(); ++t) {
    episode[t].advantage = adv[t];
    episode[t].target =
        train_.critic_target == CriticTarget::monte_carlo ? returns[t] : adv[t] + values[t];
    buffer_.push_back(std::move(episode[t]));
  }
}

EpisodeMetrics Trainer::run_episode(int episode) {
  const double eps = train_.epsilon_at(episode);
  MdpState state =
      env_.reset(derive_seed(derive_seed(seed_, seed_stream::env), static_cast<std::uint64_t>(episode)));
  const int n = env_config_.vu_count;
  EpisodeMetrics m;
  m.episode = episode;
  m.epsilon = eps;
  double latency_sum = 0.0;
  double energy_sum = 0.0;
  int rounds = 0;
  running_return_ = 0.0;
  std::vector<Step> steps;

  while (!env_.done()) {
    for (int i = 0; i < n; ++i) {
      const auto f = state.local_features(i);
      policy_.normalizer().update(Eigen::Map<const Eigen::VectorXd>(f.data(), f.size()));
    }
    Step st;
    st.eps = eps;
    st.local = policy_.local_inputs(state);
    st.global = Eigen::Map<const Eigen::VectorXd>(
        nn::Matrix(st.local.transpose()).data(), st.local.size());
    st.value = critic_.value(st.global);

    RawAction raw;
    for (int i = 0; i < n; ++i) {
      const auto s = sample(policy_.actor_for(i), st.local.row(i), eps);
      st.x.push_back(s.x);
      st.y.push_back(s.y);
      st.z_bw.push_back(s.z_bw);
      st.z_freq.push_back(s.z_freq);
      st.behavior_logp.push_back(s.logp);
      raw.splits.push_back(policy_.split_space().pair(s.x, s.y));
      raw.bandwidth_z.push_back(s.z_bw);
      raw.freq_z.push_back(s.z_freq);
    }
    const auto action = squash_action(raw, env_config_, *profile_);
    const auto result = env_.step(action);
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<size_t>(i);
      st.active.push_back(result.ran[ui] ? 1.0 : 0.0);
      if (result.ran[ui]) {
        latency_sum += result.costs[ui].t_total;
        energy_sum += result.costs[ui].e_total;
        ++rounds;
      }
    }
    m.reward += result.reward;
    double r = result.reward;
    if (train_.scale_rewards) {
      running_return_ = train_.gamma * running_return_ + r;
      reward_stats_.update(Eigen::VectorXd::Constant(1, running_return_));
      const double sd = reward_stats_.stddev()(0);
      if (reward_stats_.count() > 1 && sd > 0.0) r /= sd;
    }
    st.reward = r;
    steps.push_back(std::move(st));
    state = result.next;
  }
  m.steps = static_cast<int>(steps.size());
  if (rounds > 0) {
    m.mean_latency_s = latency_sum / rounds;
    m.mean_energy_j = energy_sum / rounds;
  }
  finish_episode(steps);
  if (static_cast<int>(buffer_.size()) >= train_.buffer_size) last_stats_ = flush();
  m.actor_loss = last_stats_.actor_loss;
  m.critic_loss = last_stats_.critic_loss;
  m.entropy = last_stats_.entropy;
  m.lr = current_lr();
  return m;
}

UpdateStats Trainer::flush() {
  UpdateStats total;
  if (buffer_.empty()) return total;
  if (train_.normalize_advantages) {
    std::vector<double> adv;
    for (const auto& s : buffer_) adv.push_back(s.advantage);
    normalize_advantages(adv);
    for (size_t i = 0; i < buffer_.size(); ++i) buffer_[i].advantage = adv[i];
  }
  const size_t batch = std::min(static_cast<size_t>(train_.batch_size), buffer_.size());
  const size_t per_pass = static_cast<size_t>(train_.buffer_size / train_.batch_size);
  std::vector<size_t> order(buffer_.size());
  int count = 0;
  for (int pass = 0; pass < train_.reuse; ++pass) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), batch_rng_);
    for (size_t m = 0; m < per_pass; ++m) {
      const size_t begin = (m * batch) % buffer_.size();
      std::vector<size_t> idx;
      for (size_t k = 0; k < batch; ++k) idx.push_back(order[(begin + k) % order.size()]);
      const auto s = update(idx);
      total.actor_loss += s.actor_loss;
      total.critic_loss += s.critic_loss;
      total.entropy += s.entropy;
      ++count;
    }
  }
  total.actor_loss /= count;
  total.critic_loss /= count;
  total.entropy /= count;
  buffer_.clear();
  ++flushes_;
  return total;
}

UpdateStats Trainer::update(const std::vector<size_t>& batch) {
  const auto& space = policy_.split_space();
  const int n_vu = env_config_.vu_count;
  const double lr = current_lr();
  UpdateStats stats;
  int actors_updated = 0;

  for (int k = 0; k < policy_.actor_count(); ++k) {
    // Rows: (sample, vehicle) pairs this actor is responsible for.
    std::vector<std::pair<size_t, int>> rows;
    for (size_t b : batch) {
      for (int i = 0; i < n_vu; ++i) {
        if (policy_.shared() || i == k) rows.emplace_back(b, i);
      }
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto nx = static_cast<Eigen::Index>(space.firsts.size());
    const auto ny = static_cast<Eigen::Index>(space.seconds.size());
    nn::Matrix inputs(n, MdpState::kFeaturesPerVu);
    nn::Matrix xmask = nn::Matrix::Ones(n, nx);
    nn::Matrix ymask(n, ny);
    nn::Matrix zb(n, 1), zf(n, 1), old_lp(n, 1), adv(n, 1), w(n, 1), eps(n, 1);
    nn::Matrix alt_x(n, 1), alt_y(n, 1), alt_b(n, 1), alt_f(n, 1);
    std::vector<int> xs, ys;
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& [b, i] = rows[static_cast<size_t>(r)];
      const auto& st = buffer_[b];
      const auto ui = static_cast<size_t>(i);
      inputs.row(r) = st.local.row(i);
      xs.push_back(st.x[ui]);
      ys.push_back(st.y[ui]);
      ymask.row(r) = space.y_mask(st.x[ui]);
      zb(r, 0) = st.z_bw[ui];
      zf(r, 0) = st.z_freq[ui];
      old_lp(r, 0) = st.behavior_logp[ui];
      adv(r, 0) = st.advantage;
      w(r, 0) = st.active[ui];
      eps(r, 0) = st.eps;
      alt_x(r, 0) = -std::log(static_cast<double>(nx));
      alt_y(r, 0) = -std::log(static_cast<double>(valid_count(ymask.row(r))));
      alt_b(r, 0) = log_logistic_density(zb(r, 0));
      alt_f(r, 0) = log_logistic_density(zf(r, 0));
    }
    if (!(w.sum() > 0.0)) continue;

    auto& actor = policy_.actor(k);
    nn::Tape tape;
    const auto g = actor.forward(tape, inputs);
    const auto lpx = nn::log_mixture(nn::categorical_log_prob(g.x_logits, xmask, xs), alt_x, eps);
    const auto lpy = nn::log_mixture(nn::categorical_log_prob(g.y_logits, ymask, ys), alt_y, eps);
    const auto lpb =
        nn::log_mixture(nn::gaussian_log_prob(g.bw_mean, g.bw_log_std, zb), alt_b, eps);
    const auto lpf =
        nn::log_mixture(nn::gaussian_log_prob(g.freq_mean, g.freq_log_std, zf), alt_f, eps);
    const auto logp = nn::add(nn::add(lpx, lpy), nn::add(lpb, lpf));
    const auto surrogate = nn::clipped_surrogate(logp, old_lp, adv, w, train_.clip_eps);
    const auto entropy = nn::weighted_mean(
        nn::add(nn::add(nn::categorical_entropy(g.x_logits, xmask),
                        nn::categorical_entropy(g.y_logits, ymask)),
                nn::add(nn::gaussian_entropy(g.bw_log_std), nn::gaussian_entropy(g.freq_log_std))),
        w);
    const auto loss = nn::scale(nn::add(surrogate, nn::scale(entropy, train_.entropy_coeff)), -1.0);
    if (!std::isfinite(loss.scalar())) {
      std::ostringstream os;
      os << "non-finite actor loss: actor=" << k << " update=" << updates_
         << " surrogate=" << surrogate.scalar() << " entropy=" << entropy.scalar()
         << " lr=" << lr << " buffered_steps=" << buffer_.size();
      throw NumericalError(os.str());
    }
    actor.params().zero_grad();
    tape.backward(loss);
    actor.params().clip_grad_norm(train_.grad_clip_norm);
    actor_opt_[static_cast<size_t>(k)]->step(lr);
    stats.actor_loss += loss.scalar();
    stats.entropy += entropy.scalar();
    ++actors_updated;
  }
  if (actors_updated > 0) {
    stats.actor_loss /= actors_updated;
    stats.entropy /= actors_updated;
  }

  const auto nb = static_cast<Eigen::Index>(batch.size());
  nn::Matrix states(nb, n_vu * MdpState::kFeaturesPerVu);
  nn::Matrix targets(nb, 1);
  for (Eigen::Index r = 0; r < nb; ++r) {
    const auto& st = buffer_[batch[static_cast<size_t>(r)]];
    states.row(r) = st.global.transpose();
    targets(r, 0) = st.target;
  }
  nn::Tape tape;
  const auto loss = nn::mse(critic_.forward(tape, states), targets);
  if (!std::isfinite(loss.scalar())) {
    std::ostringstream os;
    os << "non-finite critic loss: update=" << updates_ << " lr=" << lr
       << " target_range=[" << targets.minCoeff() << ", " << targets.maxCoeff() << "]";
    throw NumericalError(os.str());
  }
  critic_.params().zero_grad();
  tape.backward(loss);
  critic_.params().clip_grad_norm(train_.grad_clip_norm);
  critic_opt_->step(lr);
  stats.critic_loss = loss.scalar();
  ++updates_;
  return stats;
}

std::vector<EpisodeMetrics> Trainer::train(
    const std::function<void(const EpisodeMetrics&)>& on_episode,
    const std::optional<std::filesystem::path>& checkpoint_dir) {
  std::vector<EpisodeMetrics> out;
  out.reserve(static_cast<size_t>(train_.episodes));
  for (int e = 0; e < train_.episodes; ++e) {
    out.push_back(run_episode(e));
    if (on_episode) on_episode(out.back());
    if (checkpoint_dir && train_.checkpoint_every > 0 && (e + 1) % train_.checkpoint_every == 0 &&
        e + 1 < train_.episodes) {
      write_checkpoint(*checkpoint_dir / ("checkpoint_ep" + std::to_string(e + 1) + ".json"),
                       to_checkpoint());
    }
  }
  if (checkpoint_dir) write_checkpoint(*checkpoint_dir / "checkpoint_final.json", to_checkpoint());
  return out;
}

CheckpointData Trainer::to_checkpoint() const {
  auto d = policy_.to_checkpoint();
  append_parameters(d, "critic", critic_.params());
  d.metadata["updates"] = std::to_string(updates_);
  d.metadata["profile"] = profile_->name();
  return d;
}

}  // namespace usfl
