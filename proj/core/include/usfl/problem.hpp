// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Joint split-point and resource-allocation problem:
//
//   min  sum_i E_i + rho * max_i T_i
//   C1   sum_i B_i   <= B_total
//   C2   sum_i f_e,i <= F_total
//   C3   1 <= X_i < Y_i <= L
//   C4   T_i <= t_stay,i
//   C5   E_i <= E_max
//
// plus an exhaustive-search oracle on a simplex grid and simple baselines.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "usfl/cost.hpp"
#include "usfl/profile.hpp"
#include "usfl/radio.hpp"

namespace usfl {

struct Allocation {
  std::vector<double> bandwidth;  // Hz per vehicle
  std::vector<double> es_freq;    // cycles/s per vehicle
  std::vector<SplitPair> splits;

  size_t size() const { return splits.size(); }
  friend bool operator==(const Allocation&, const Allocation&) = default;
};

struct SystemLimits {
  double total_bandwidth = 0.0;
  double total_es_freq = 0.0;
  double energy_budget = 0.0;  // per vehicle
  double weight_rho = 0.0;

  void validate() const;
};

/// Everything about one vehicle except the decision variables; the uplink
/// bandwidth in `radio` and the ES share in `compute` are overwritten by the
/// allocation being evaluated.
struct VehicleSetup {
  MobilityTrace trace;
  ComputeParams compute;
  RadioParams radio;
};

struct ProblemInstance {
  std::string id;
  std::shared_ptr<const ModelProfile> profile;
  std::vector<VehicleSetup> vehicles;
  SystemLimits limits;
  bool with_sae = true;
  double rate_step = 0.0;  // <= 0: stay_time / 1000 per vehicle

  int vu_count() const { return static_cast<int>(vehicles.size()); }
  std::vector<double> stay_times() const;
  void validate() const;
};

double evaluate_objective(std::span<const CostBreakdown> costs, double rho);

std::vector<CostBreakdown> evaluate_allocation(const ProblemInstance& instance,
                                               const Allocation& allocation);

struct ConstraintViolation {
  std::string constraint;  // "C1".."C5"
  int vehicle = -1;        // -1 for system-wide constraints
  double margin = 0.0;     // amount by which the bound is exceeded
};

struct FeasibilityReport {
  std::vector<ConstraintViolation> violations;

  bool feasible() const { return violations.empty(); }
  std::string describe() const;
};

FeasibilityReport check_feasibility(const Allocation& allocation,
                                    std::span<const CostBreakdown> costs,
                                    const SystemLimits& limits,
                                    std::span<const double> stay_times, int total_layers);

struct OracleOptions {
  int bw_grid_points = 8;
  int freq_grid_points = 8;
  std::uint64_t max_evaluations = 500'000'000;
  unsigned threads = 1;
};

struct OracleResult {
  Allocation allocation;
  double objective = 0.0;
  std::vector<CostBreakdown> costs;
  std::uint64_t evaluated = 0;
};

/// Exhaustive search over allowed split pairs per vehicle and resource shares
/// j/G (j >= 1, sum <= G) of each total. Ties resolve to the
/// lexicographically smallest (splits, bandwidth, frequency) point. Throws
/// InfeasibleError when no grid point meets C4/C5 and BudgetExceeded when
/// the search space exceeds `max_evaluations`.
OracleResult brute_force_solve(const ProblemInstance& instance,
                               const OracleOptions& options = {});

enum class BaselineKind { equal, random, fixed_split };

struct BaselineSpec {
  BaselineKind kind = BaselineKind::equal;
  std::uint64_t seed = 0;
  SplitPair split{};
};

Allocation baseline_allocate(const ProblemInstance& instance, const BaselineSpec& spec);
std::string baseline_name(const BaselineSpec& spec);

/// "b1;b2|f1;f2|x1-y1;x2-y2" with full-precision numbers.
std::string format_allocation(const Allocation& allocation);

}  // namespace usfl
