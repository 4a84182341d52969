// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "usfl/tape.hpp"

namespace usfl::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParameterSet& params, AdamConfig config = {});

  /// One update from the accumulated gradients at learning rate lr.
  void step(double lr);
  long steps() const { return t_; }

 private:
  ParameterSet& params_;
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

}  // namespace usfl::nn
