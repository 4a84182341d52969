// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/policy_eval.hpp"

#include <random>

#include "usfl/error.hpp"
#include "usfl/rng.hpp"

namespace usfl {

ProblemInstance make_instance(const EnvConfig& env, std::shared_ptr<const ModelProfile> profile,
                              const InstanceSpec& spec, std::uint64_t seed, std::string id) {
  if (spec.vu_count < 1) throw InvalidArgument("instance: vu_count must be >= 1");
  if (!(spec.position_min >= 0.0 && spec.position_max >= spec.position_min &&
        spec.position_max < env.coverage_diameter)) {
    throw InvalidArgument("instance: position range must lie inside the coverage area");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(spec.position_min, spec.position_max);
  ProblemInstance inst;
  inst.id = std::move(id);
  inst.profile = std::move(profile);
  inst.with_sae = env.with_sae;
  for (int i = 0; i < spec.vu_count; ++i) {
    VehicleSetup v;
    v.compute = env.compute;
    v.radio = env.radio;
    v.trace = MobilityTrace{env.es_height, env.coverage_diameter, pos(rng), env.speed, 0.0};
    v.trace.stay_time = v.trace.max_stay_time();
    inst.vehicles.push_back(v);
  }
  inst.limits.total_bandwidth = spec.vu_count * env.max_bandwidth_per_vu;
  inst.limits.total_es_freq = spec.vu_count * env.max_es_freq_per_vu;
  inst.limits.energy_budget = spec.energy_budget;
  inst.limits.weight_rho = env.rho;
  inst.validate();
  return inst;
}

std::vector<ProblemInstance> make_instance_set(const EnvConfig& env,
                                               std::shared_ptr<const ModelProfile> profile,
                                               const InstanceSpec& spec, std::uint64_t seed,
                                               int count) {
  std::vector<ProblemInstance> out;
  for (int k = 0; k < count; ++k) {
    out.push_back(make_instance(env, profile, spec,
                                derive_seed(seed, static_cast<std::uint64_t>(k)),
                                "instance-" + std::to_string(k)));
  }
  return out;
}

EnvConfig env_for_instance(const EnvConfig& env, const ProblemInstance& instance) {
  EnvConfig c = env;
  c.vu_count = instance.vu_count();
  c.total_bandwidth = instance.limits.total_bandwidth;
  c.total_es_freq = instance.limits.total_es_freq;
  c.energy_budget = instance.limits.energy_budget;
  c.rho = instance.limits.weight_rho;
  c.with_sae = instance.with_sae;
  return c;
}

MdpState instance_state(const ProblemInstance& instance, const EnvConfig& env,
                        const InstanceSpec& spec) {
  const EnvConfig c = env_for_instance(env, instance);
  VehicularEnv probe(c, instance.profile);
  MdpState s;
  for (const auto& v : instance.vehicles) {
    const double d = distance(v.trace, 0.0);
    s.remaining_tasks.push_back(spec.tasks);
    s.distance.push_back(d);
    s.remaining_energy.push_back(env.energy_budget);
    s.remaining_exec_time.push_back(spec.tasks * probe.nominal_task_time(d));
  }
  return s;
}

Allocation policy_allocation(MultiAgentPolicy& policy, const ProblemInstance& instance,
                             const EnvConfig& env, const InstanceSpec& spec) {
  const EnvConfig c = env_for_instance(env, instance);
  const auto action =
      policy.greedy_action(instance_state(instance, env, spec), c, *instance.profile);
  return Allocation{action.bandwidth, action.es_freq, action.splits};
}

std::vector<GapRow> policy_oracle_gap(MultiAgentPolicy& policy,
                                      const std::vector<ProblemInstance>& instances,
                                      const EnvConfig& env, const InstanceSpec& spec,
                                      const OracleOptions& options) {
  std::vector<GapRow> rows;
  for (const auto& inst : instances) {
    GapRow r;
    r.id = inst.id;
    const auto oracle = brute_force_solve(inst, options);
    const auto alloc = policy_allocation(policy, inst, env, spec);
    const auto costs = evaluate_allocation(inst, alloc);
    r.policy_objective = evaluate_objective(costs, inst.limits.weight_rho);
    r.oracle_objective = oracle.objective;
    r.relative_gap = r.policy_objective / r.oracle_objective - 1.0;
    r.policy_feasible = check_feasibility(alloc, costs, inst.limits, inst.stay_times(),
                                          inst.profile->total_layers())
                            .feasible();
    r.policy_allocation = format_allocation(alloc);
    r.oracle_allocation = format_allocation(oracle.allocation);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace usfl
