// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Return and advantage estimators and the PPO losses in scalar form.

#pragma once

#include <span>
#include <vector>

namespace usfl {

/// G_t = sum_{t' >= t} gamma^(t' - t) r_t'. Throws on an empty input.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

/// GAE with delta_t = r_t + gamma V(s_{t+1}) - V(s_t) and V = 0 past the
/// last step.
std::vector<double> gae_advantages(std::span<const double> rewards,
                                   std::span<const double> values, double gamma, double lam);

/// In place: subtract the mean, divide by the population std (when > 0).
void normalize_advantages(std::span<double> advantages);

/// min(r A, clip(r, 1 - eps, 1 + eps) A)
double clipped_term(double ratio, double advantage, double clip_eps);

/// -(mean_i clipped_term(exp(new_i - old_i), A_i) + entropy_coeff * entropy)
double clipped_actor_loss(std::span<const double> new_logp, std::span<const double> old_logp,
                          std::span<const double> advantages, double clip_eps, double entropy,
                          double entropy_coeff);

/// Mean squared error.
double critic_loss(std::span<const double> values, std::span<const double> returns);

}  // namespace usfl
