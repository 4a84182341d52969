// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/optimizer.hpp"

#include <cmath>

namespace usfl::nn {

Adam::Adam(ParameterSet& params, AdamConfig config) : params_(params), config_(config) {
  for (size_t i = 0; i < params_.count(); ++i) {
    const auto& v = params_.at(i).value();
    m_.push_back(Matrix::Zero(v.rows(), v.cols()));
    v_.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.count(); ++i) {
    auto& p = params_.at(i);
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad();
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad().cwiseAbs2();
    p.value().array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

}  // namespace usfl::nn
