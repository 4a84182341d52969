// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/normalizer.hpp"

#include "usfl/error.hpp"

namespace usfl {

RunningNormalizer::RunningNormalizer(int dim, double std_floor)
    : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)), std_floor_(std_floor) {
  if (dim < 0 || !(std_floor > 0.0)) throw InvalidArgument("normalizer: bad dimension or floor");
}

Eigen::VectorXd RunningNormalizer::stddev() const {
  if (count_ == 0) return Eigen::VectorXd::Zero(mean_.size());
  return (m2_ / static_cast<double>(count_)).cwiseSqrt();
}

void RunningNormalizer::update(const Eigen::VectorXd& x) {
  if (x.size() != mean_.size()) throw InvalidArgument("normalizer: dimension mismatch");
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta.cwiseProduct(x - mean_);
}

Eigen::VectorXd RunningNormalizer::normalize(const Eigen::VectorXd& x) const {
  if (x.size() != mean_.size()) throw InvalidArgument("normalizer: dimension mismatch");
  return (x - mean_).cwiseQuotient(stddev().cwiseMax(std_floor_));
}

void RunningNormalizer::restore(std::uint64_t count, Eigen::VectorXd mean, Eigen::VectorXd m2) {
  if (mean.size() != m2.size()) throw InvalidArgument("normalizer: inconsistent state");
  count_ = count;
  mean_ = std::move(mean);
  m2_ = std::move(m2);
}

}  // namespace usfl
