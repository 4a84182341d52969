// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/returns.hpp"

#include <algorithm>
#include <cmath>

#include "usfl/error.hpp"

namespace usfl {

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw InvalidArgument("discounted_returns: empty trajectory");
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

std::vector<double> gae_advantages(std::span<const double> rewards,
                                   std::span<const double> values, double gamma, double lam) {
  if (rewards.size() != values.size()) {
    throw InvalidArgument("gae_advantages: rewards and values differ in length");
  }
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (size_t t = rewards.size(); t-- > 0;) {
    const double next = t + 1 < values.size() ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * next - values[t];
    acc = delta + gamma * lam * acc;
    out[t] = acc;
  }
  return out;
}

void normalize_advantages(std::span<double> advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : advantages) a = sd > 0.0 ? (a - mean) / sd : a - mean;
}

double clipped_term(double ratio, double advantage, double clip_eps) {
  return std::min(ratio * advantage,
                  std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage);
}

double clipped_actor_loss(std::span<const double> new_logp, std::span<const double> old_logp,
                          std::span<const double> advantages, double clip_eps, double entropy,
                          double entropy_coeff) {
  if (new_logp.size() != old_logp.size() || new_logp.size() != advantages.size() ||
      new_logp.empty()) {
    throw InvalidArgument("clipped_actor_loss: inputs must be aligned and nonempty");
  }
  double acc = 0.0;
  for (size_t i = 0; i < new_logp.size(); ++i) {
    const double r = std::exp(new_logp[i] - old_logp[i]);
    if (!std::isfinite(r)) throw NumericalError("clipped_actor_loss: non-finite ratio");
    acc += clipped_term(r, advantages[i], clip_eps);
  }
  return -(acc / static_cast<double>(new_logp.size()) + entropy_coeff * entropy);
}

double critic_loss(std::span<const double> values, std::span<const double> returns) {
  if (values.size() != returns.size() || values.empty()) {
    throw InvalidArgument("critic_loss: inputs must be aligned and nonempty");
  }
  double acc = 0.0;
  for (size_t i = 0; i < values.size(); ++i) acc += (values[i] - returns[i]) * (values[i] - returns[i]);
  return acc / static_cast<double>(values.size());
}

}  // namespace usfl
