// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded single-round problem instances and the comparison of a trained
// policy's greedy allocation against the exhaustive-search optimum.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "usfl/env.hpp"
#include "usfl/problem.hpp"
#include "usfl/trainer.hpp"

namespace usfl {

struct InstanceSpec {
  int vu_count = 2;
  double position_min = 0.0;   // initial position l0 along the road, meters
  double position_max = 50.0;
  double energy_budget = 5.0;  // Joule per vehicle
  int tasks = 5;               // remaining tasks shown to the policy
};

/// Vehicles draw l0 ~ U[position_min, position_max] and stay until they
/// leave coverage. Totals are vu_count times the per-vehicle maxima of `env`.
ProblemInstance make_instance(const EnvConfig& env, std::shared_ptr<const ModelProfile> profile,
                              const InstanceSpec& spec, std::uint64_t seed, std::string id);
std::vector<ProblemInstance> make_instance_set(const EnvConfig& env,
                                               std::shared_ptr<const ModelProfile> profile,
                                               const InstanceSpec& spec, std::uint64_t seed,
                                               int count);

/// Env configuration matching an instance's vehicle count and totals.
EnvConfig env_for_instance(const EnvConfig& env, const ProblemInstance& instance);
/// The MDP state a policy sees at the start of the instance's round.
MdpState instance_state(const ProblemInstance& instance, const EnvConfig& env,
                        const InstanceSpec& spec);
Allocation policy_allocation(MultiAgentPolicy& policy, const ProblemInstance& instance,
                             const EnvConfig& env, const InstanceSpec& spec);

struct GapRow {
  std::string id;
  double policy_objective = 0.0;
  double oracle_objective = 0.0;
  double relative_gap = 0.0;  // policy / oracle - 1
  bool policy_feasible = false;
  std::string policy_allocation;
  std::string oracle_allocation;
};

std::vector<GapRow> policy_oracle_gap(MultiAgentPolicy& policy,
                                      const std::vector<ProblemInstance>& instances,
                                      const EnvConfig& env, const InstanceSpec& spec,
                                      const OracleOptions& options);

}  // namespace usfl
