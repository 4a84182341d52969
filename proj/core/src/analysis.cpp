// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/analysis.hpp"

#include <algorithm>

#include "usfl/cost.hpp"
#include "usfl/error.hpp"
#include "usfl/rng.hpp"

namespace usfl {
namespace {

std::uint64_t count_seed(std::uint64_t seed, int vu_count) {
  return derive_seed(seed, static_cast<std::uint64_t>(vu_count));
}

}  // namespace

std::vector<SmashedBytesRow> smashed_bytes_by_cut(const ModelProfile& profile) {
  std::vector<SmashedBytesRow> rows;
  for (int cut : profile.first_split_candidates()) {
    SmashedBytesRow r;
    r.cut_layer = cut;
    r.bytes_without_sae = profile.smashed_size(cut, false);
    r.bytes_with_sae = profile.smashed_size(cut, true);
    rows.push_back(r);
  }
  return rows;
}

ProblemInstance density_instance(const EnvConfig& env, std::shared_ptr<const ModelProfile> profile,
                                 const SweepSection& sweep, int vu_count, bool with_sae,
                                 std::uint64_t seed) {
  InstanceSpec spec;
  spec.vu_count = vu_count;
  spec.position_min = sweep.position_min;
  spec.position_max = sweep.position_max;
  EnvConfig e = env;
  e.with_sae = with_sae;
  ProblemInstance inst = make_instance(e, std::move(profile), spec, seed,
                                       "density-" + std::to_string(vu_count));
  inst.limits.total_bandwidth = sweep.total_bandwidth;
  inst.limits.total_es_freq = sweep.total_es_freq;
  return inst;
}

std::vector<DensityRow> latency_by_density(const EnvConfig& env,
                                           std::shared_ptr<const ModelProfile> profile,
                                           const SweepSection& sweep, std::uint64_t seed) {
  std::vector<DensityRow> rows;
  for (int count : sweep.vehicle_counts) {
    const std::uint64_t s = count_seed(seed, count);
    for (bool with_sae : {false, true}) {
      const ProblemInstance inst = density_instance(env, profile, sweep, count, with_sae, s);
      const Allocation alloc = baseline_allocate(inst, BaselineSpec{});
      const std::vector<CostBreakdown> costs = evaluate_allocation(inst, alloc);
      DensityRow r;
      r.vehicles = count;
      r.with_sae = with_sae;
      for (const CostBreakdown& c : costs) {
        r.communication_latency_s += c.communication_latency();
        r.computation_latency_s += c.computation_latency();
        r.round_latency_s = std::max(r.round_latency_s, c.t_total);
      }
      r.communication_latency_s /= count;
      r.computation_latency_s /= count;
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<SaeOverheadRow> sae_overhead_by_cut(const EnvConfig& env,
                                                std::shared_ptr<const ModelProfile> profile,
                                                const SweepSection& sweep, std::uint64_t seed) {
  const int y = profile->default_split().y;
  std::vector<SaeOverheadRow> rows;
  for (int count : sweep.vehicle_counts) {
    const std::uint64_t s = count_seed(seed, count);
    const ProblemInstance plain = density_instance(env, profile, sweep, count, false, s);
    const ProblemInstance sae = density_instance(env, profile, sweep, count, true, s);
    const Allocation equal = baseline_allocate(plain, BaselineSpec{});
    for (int cut : profile->first_split_candidates()) {
      if (cut >= y) continue;
      Allocation alloc = equal;
      alloc.splits.assign(alloc.splits.size(), SplitPair{cut, y});
      const auto without = evaluate_allocation(plain, alloc);
      const auto with = evaluate_allocation(sae, alloc);
      SaeOverheadRow r;
      r.vehicles = count;
      r.cut_layer = cut;
      for (size_t i = 0; i < with.size(); ++i) {
        r.encode_time_s += with[i].t_sem_enc;
        r.decode_time_s += with[i].t_sem_dec;
        r.uplink_time_without_sae_s += without[i].t_com_fa;
        r.uplink_time_with_sae_s += with[i].t_com_fa;
      }
      r.encode_time_s /= count;
      r.decode_time_s /= count;
      r.uplink_time_without_sae_s /= count;
      r.uplink_time_with_sae_s /= count;
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<SplitPairRow> consumption_by_split(const EnvConfig& env,
                                               std::shared_ptr<const ModelProfile> profile,
                                               const SweepSection& sweep, std::uint64_t seed) {
  std::vector<SplitPairRow> rows;
  for (int count : sweep.vehicle_counts) {
    const ProblemInstance inst =
        density_instance(env, profile, sweep, count, env.with_sae, count_seed(seed, count));
    for (SplitPair pair : profile->allowed_split_pairs()) {
      BaselineSpec spec;
      spec.kind = BaselineKind::fixed_split;
      spec.split = pair;
      const auto costs = evaluate_allocation(inst, baseline_allocate(inst, spec));
      SplitPairRow r;
      r.vehicles = count;
      r.split = pair;
      for (const CostBreakdown& c : costs) {
        r.total_energy_j += c.e_total;
        r.max_latency_s = std::max(r.max_latency_s, c.t_total);
      }
      r.weighted =
          sweep.energy_weight * r.total_energy_j + sweep.latency_weight * r.max_latency_s;
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace usfl
