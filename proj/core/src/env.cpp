// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>

#include "usfl/error.hpp"

namespace usfl {

namespace {

constexpr double kSumTolerance = 1e-12;

void project_resource(std::vector<double>& values, double per_vu_max, double total) {
  double sum = 0.0;
  for (auto& v : values) {
    v = std::clamp(v, 0.0, per_vu_max);
    sum += v;
  }
  if (sum > total * (1.0 + kSumTolerance)) {
    const double scale = total / sum;
    for (auto& v : values) v *= scale;
  }
}

int nearest(const std::vector<int>& candidates, int value) {
  int best = candidates.front();
  for (int c : candidates) {
    if (std::abs(c - value) < std::abs(best - value)) best = c;
  }
  return best;
}

}  // namespace

double EnvConfig::bandwidth_total() const {
  return total_bandwidth > 0.0 ? total_bandwidth : vu_count * max_bandwidth_per_vu;
}

double EnvConfig::es_freq_total() const {
  return total_es_freq > 0.0 ? total_es_freq : vu_count * max_es_freq_per_vu;
}

void EnvConfig::validate() const {
  if (vu_count < 1) throw InvalidArgument("env: vu_count must be >= 1");
  if (!(task_rate > 0.0)) throw InvalidArgument("env: task_rate must be > 0");
  if (max_steps < 1) throw InvalidArgument("env: max_steps must be >= 1");
  if (!(distance_min >= es_height && distance_max >= distance_min)) {
    throw InvalidArgument("env: distance range must satisfy es_height <= min <= max");
  }
  if (std::sqrt(distance_max * distance_max - es_height * es_height) >
      coverage_diameter / 2.0) {
    throw InvalidArgument("env: distance_max lies outside the coverage area");
  }
  if (!(max_bandwidth_per_vu > 0.0 && max_es_freq_per_vu > 0.0)) {
    throw InvalidArgument("env: per-vehicle maxima must be > 0");
  }
  if (!(energy_budget > 0.0)) throw InvalidArgument("env: energy_budget must be > 0");
  if (!(rho >= 0.0)) throw InvalidArgument("env: rho must be set and >= 0");
  if (step_mode == StepMode::fixed && !(step_duration > 0.0)) {
    throw InvalidArgument("env: step_duration must be > 0");
  }
  if (!(min_fraction > 0.0 && min_fraction < 1.0)) {
    throw InvalidArgument("env: min_fraction must lie in (0, 1)");
  }
  if (!(speed > 0.0)) throw InvalidArgument("env: speed must be > 0");
  compute.validate();
  radio.validate();
}

std::vector<double> MdpState::local_features(int vu) const {
  const auto i = static_cast<size_t>(vu);
  return {static_cast<double>(remaining_tasks.at(i)), remaining_exec_time.at(i),
          remaining_energy.at(i), distance.at(i)};
}

std::vector<double> MdpState::global_features() const {
  std::vector<double> out;
  out.reserve(remaining_tasks.size() * kFeaturesPerVu);
  for (int i = 0; i < vu_count(); ++i) {
    const auto f = local_features(i);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

double squash_fraction(double z, double floor) {
  return floor + (1.0 - floor) / (1.0 + std::exp(-z));
}

MdpAction squash_action(const RawAction& raw, const EnvConfig& config,
                        const ModelProfile& profile) {
  const auto n = raw.splits.size();
  if (raw.bandwidth_z.size() != n || raw.freq_z.size() != n) {
    throw InvalidArgument("raw action: inconsistent lengths");
  }
  MdpAction a;
  a.splits = raw.splits;
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(raw.bandwidth_z[i]) || !std::isfinite(raw.freq_z[i])) {
      throw NumericalError("raw action: non-finite output for vehicle " + std::to_string(i));
    }
    a.bandwidth.push_back(config.max_bandwidth_per_vu *
                          squash_fraction(raw.bandwidth_z[i], config.min_fraction));
    a.es_freq.push_back(config.max_es_freq_per_vu *
                        squash_fraction(raw.freq_z[i], config.min_fraction));
  }
  return project_action(a, config, profile);
}

MdpAction project_action(const MdpAction& action, const EnvConfig& config,
                         const ModelProfile& profile) {
  const auto n = action.splits.size();
  if (action.bandwidth.size() != n || action.es_freq.size() != n) {
    throw InvalidArgument("action: inconsistent lengths");
  }
  MdpAction out = action;
  project_resource(out.bandwidth, config.max_bandwidth_per_vu, config.bandwidth_total());
  project_resource(out.es_freq, config.max_es_freq_per_vu, config.es_freq_total());
  const auto firsts = profile.first_split_candidates();
  for (auto& s : out.splits) {
    if (profile.is_allowed(s)) continue;
    const int x = nearest(firsts, s.x);
    std::vector<int> ys;
    for (const auto& p : profile.allowed_split_pairs()) {
      if (p.x == x) ys.push_back(p.y);
    }
    s = SplitPair{x, nearest(ys, s.y)};
  }
  return out;
}

VehicularEnv::VehicularEnv(EnvConfig config, std::shared_ptr<const ModelProfile> profile)
    : config_(std::move(config)), profile_(std::move(profile)) {
  if (!profile_) throw InvalidArgument("env: no profile");
  config_.validate();
  if (config_.with_sae && !profile_->sae()) {
    throw InvalidArgument("env: with_sae requires an SAE profile");
  }
}

double VehicularEnv::nominal_task_time(double d) const {
  auto radio = config_.radio;
  radio.uplink_bandwidth = config_.bandwidth_total() / config_.vu_count;
  auto compute = config_.compute;
  compute.es_cpu_hz_allocated = config_.es_freq_total() / config_.vu_count;
  const LinkRates rates{
      link_rate(radio, Direction::uplink, radio.uplink_bandwidth, d),
      link_rate(radio, Direction::downlink, radio.downlink_bandwidth, d)};
  return round_cost(*profile_, profile_->default_split(), compute, radio, rates,
                    config_.with_sae)
      .t_total;
}

MdpState VehicularEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> tasks(config_.task_rate);
  std::uniform_real_distribution<double> dist(config_.distance_min, config_.distance_max);
  const auto n = static_cast<size_t>(config_.vu_count);
  state_ = MdpState{};
  traces_.clear();
  frozen_.assign(n, false);
  for (size_t i = 0; i < n; ++i) {
    const int k = tasks(rng);
    const double d = dist(rng);
    // Place the vehicle on the approaching side at distance d.
    const double offset =
        std::sqrt(std::max(0.0, d * d - config_.es_height * config_.es_height));
    MobilityTrace trace{config_.es_height, config_.coverage_diameter,
                        config_.coverage_diameter / 2.0 - offset, config_.speed, 0.0};
    trace.stay_time = trace.max_stay_time();
    traces_.push_back(trace);
    state_.remaining_tasks.push_back(k);
    state_.distance.push_back(d);
    state_.remaining_energy.push_back(config_.energy_budget);
    state_.remaining_exec_time.push_back(k * nominal_task_time(d));
  }
  elapsed_ = 0.0;
  steps_ = 0;
  done_ = !any_active();
  return state_;
}

bool VehicularEnv::active(size_t i) const {
  return state_.remaining_tasks[i] > 0 && !frozen_[i];
}

bool VehicularEnv::any_active() const {
  for (size_t i = 0; i < state_.remaining_tasks.size(); ++i) {
    if (active(i)) return true;
  }
  return false;
}

double step_reward(std::span<const CostBreakdown> costs, double rho) {
  double reward = 0.0;
  for (const CostBreakdown& c : costs) reward -= c.e_total + rho * c.t_total;
  return reward;
}

StepResult VehicularEnv::step(const MdpAction& action) {
  const auto n = static_cast<size_t>(config_.vu_count);
  if (action.size() != n) throw InvalidArgument("env.step: action has wrong vehicle count");
  if (!(project_action(action, config_, *profile_) == action)) {
    throw InvalidArgument("env.step: action is not projected");
  }
  StepResult r;
  r.costs.assign(n, CostBreakdown{});
  r.ran.assign(n, false);
  r.completed.assign(n, false);
  if (done_) {
    r.next = state_;
    r.done = true;
    return r;
  }

  double slowest = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!active(i)) continue;
    if (!(action.bandwidth[i] > 0.0 && action.es_freq[i] > 0.0)) {
      throw InvalidArgument("env.step: active vehicle " + std::to_string(i) +
                            " has no bandwidth or ES share");
    }
    auto radio = config_.radio;
    radio.uplink_bandwidth = action.bandwidth[i];
    auto compute = config_.compute;
    compute.es_cpu_hz_allocated = action.es_freq[i];
    const double d = state_.distance[i];
    const LinkRates rates{
        link_rate(radio, Direction::uplink, radio.uplink_bandwidth, d),
        link_rate(radio, Direction::downlink, radio.downlink_bandwidth, d)};
    const auto c = round_cost(*profile_, action.splits[i], compute, radio, rates,
                              config_.with_sae);
    r.costs[i] = c;
    r.ran[i] = true;
    slowest = std::max(slowest, c.t_total);

    if (c.e_total <= state_.remaining_energy[i]) {
      state_.remaining_energy[i] -= c.e_total;
      state_.remaining_tasks[i] -= 1;
      r.completed[i] = true;
    } else {
      state_.remaining_energy[i] = 0.0;
      frozen_[i] = true;
    }
    state_.remaining_exec_time[i] = std::max(0.0, state_.remaining_exec_time[i] - c.t_total);
  }

  r.reward = step_reward(r.costs, config_.rho);
  const double duration = config_.step_mode == StepMode::fixed ? config_.step_duration : slowest;
  elapsed_ += duration;
  for (size_t i = 0; i < n; ++i) {
    const auto& tr = traces_[i];
    state_.distance[i] = distance(tr, std::min(elapsed_, tr.stay_time));
  }
  ++steps_;
  done_ = steps_ >= config_.max_steps || !any_active();
  r.next = state_;
  r.done = done_;
  return r;
}

void write_trace_header(std::ostream& os) {
  os << "episode,step,vu,bandwidth_hz,es_freq_hz,split_x,split_y,reward,latency_s,energy_j\n";
}

void write_trace_rows(std::ostream& os, int episode, int step, const MdpAction& action,
                      const StepResult& result) {
  for (size_t i = 0; i < action.size(); ++i) {
    os << episode << ',' << step << ',' << i << ',' << action.bandwidth[i] << ','
       << action.es_freq[i] << ',' << action.splits[i].x << ',' << action.splits[i].y << ','
       << result.reward << ',' << result.costs[i].t_total << ',' << result.costs[i].e_total
       << '\n';
  }
}

}  // namespace usfl
