// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "usfl/profile.hpp"
#include "usfl/tape.hpp"

namespace usfl::testing {

inline double rel_err(double actual, double expected) {
  if (expected == 0.0) return std::abs(actual);
  return std::abs(actual - expected) / std::abs(expected);
}

inline std::filesystem::path bundled_profile_path() {
  return std::filesystem::path(USFL_TEST_DATA_DIR) / "profiles" / "resnet18_cifar10.json";
}

inline std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(USFL_TEST_CONFIG_DIR) / name;
}

inline std::shared_ptr<const ModelProfile> bundled_profile() {
  static const auto profile =
      std::make_shared<const ModelProfile>(load_profile(bundled_profile_path()));
  return profile;
}

struct UniformLayers {
  int count = 6;
  double flops_forward = 1.0;
  double flops_backward = 1.0;
  double output_bytes = 100.0;
  double grad_bytes = 100.0;
  std::vector<double> scores;  // empty: all 0.5
};

inline ModelProfile uniform_profile(const UniformLayers& spec, std::vector<SplitPair> pairs,
                                    std::optional<SaeProfile> sae = std::nullopt) {
  std::vector<LayerProfile> layers;
  for (int i = 1; i <= spec.count; ++i) {
    LayerProfile l;
    l.index = i;
    l.name = "layer" + std::to_string(i);
    l.flops_forward = spec.flops_forward;
    l.flops_backward = spec.flops_backward;
    l.output_bytes_forward = spec.output_bytes;
    l.grad_bytes_backward = spec.grad_bytes;
    l.semantic_score =
        spec.scores.empty() ? 0.5 : spec.scores.at(static_cast<size_t>(i - 1));
    layers.push_back(l);
  }
  return ModelProfile("uniform", std::move(layers), std::move(sae), std::move(pairs));
}

/// Largest relative error between central differences and the gradients
/// left in `params` by `loss(true)`. `loss(false)` must only evaluate.
/// Gradients below `floor` in magnitude are compared absolutely.
inline double max_fd_error(nn::ParameterSet& params, const std::function<double(bool)>& loss,
                           double h = 1e-4, double floor = 1e-6,
                           std::string* worst_name = nullptr) {
  params.zero_grad();
  loss(true);
  double worst = 0.0;
  for (size_t k = 0; k < params.count(); ++k) {
    nn::Parameter& p = params.at(k);
    const nn::Matrix analytic = p.grad();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double v = p.value()(i);
      p.value()(i) = v + h;
      const double up = loss(false);
      p.value()(i) = v - h;
      const double down = loss(false);
      p.value()(i) = v;
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(numeric), std::abs(analytic(i)), floor});
      const double err = std::abs(numeric - analytic(i)) / scale;
      if (err > worst) {
        worst = err;
        if (worst_name) *worst_name = p.name() + "[" + std::to_string(i) + "]";
      }
    }
  }
  return worst;
}

}  // namespace usfl::testing
