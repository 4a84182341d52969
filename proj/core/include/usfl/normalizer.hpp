// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace usfl {

/// Per-dimension running mean and standard deviation (Welford).
class RunningNormalizer {
 public:
  explicit RunningNormalizer(int dim = 0, double std_floor = 1e-8);

  int dim() const { return static_cast<int>(mean_.size()); }
  std::uint64_t count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  Eigen::VectorXd stddev() const;
  double std_floor() const { return std_floor_; }

  void update(const Eigen::VectorXd& x);
  /// (x - mean) / max(std, floor)
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;

  /// Raw accumulator state (for checkpoints).
  const Eigen::VectorXd& m2() const { return m2_; }
  void restore(std::uint64_t count, Eigen::VectorXd mean, Eigen::VectorXd m2);

 private:
  std::uint64_t count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
  double std_floor_;
};

}  // namespace usfl
