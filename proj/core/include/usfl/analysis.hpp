// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Static sweeps over the cost model: payload size per cut, SAE overhead,
// latency versus vehicle density, and split-pair consumption under equal
// resource shares.

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "usfl/config.hpp"
#include "usfl/problem.hpp"

namespace usfl {

struct SmashedBytesRow {
  int cut_layer = 0;
  double bytes_without_sae = 0.0;
  double bytes_with_sae = 0.0;
};

/// One row per distinct first split point.
std::vector<SmashedBytesRow> smashed_bytes_by_cut(const ModelProfile& profile);

struct SaeOverheadRow {
  int vehicles = 0;
  int cut_layer = 0;
  double encode_time_s = 0.0;
  double decode_time_s = 0.0;
  double uplink_time_without_sae_s = 0.0;
  double uplink_time_with_sae_s = 0.0;
};


/// Vehicles with l0 ~ U[position_min, position_max], sharing the sweep
/// totals equally, at the profile's default split.
ProblemInstance density_instance(const EnvConfig& env, std::shared_ptr<const ModelProfile> profile,
                                 const SweepSection& sweep, int vu_count, bool with_sae,
                                 std::uint64_t seed);

struct DensityRow {
  int vehicles = 0;
  bool with_sae = false;
  double communication_latency_s = 0.0;  // mean over vehicles
  double computation_latency_s = 0.0;    // mean over vehicles
  double round_latency_s = 0.0;          // slowest vehicle
};

/// Rows for every vehicle count, without and with SAE. Both variants of a
/// count share the same vehicle positions.
std::vector<DensityRow> latency_by_density(const EnvConfig& env,
                                           std::shared_ptr<const ModelProfile> profile,
                                           const SweepSection& sweep, std::uint64_t seed);

/// Means over the vehicles of density_instance for every vehicle count and
/// first split; the second split is the profile default.
std::vector<SaeOverheadRow> sae_overhead_by_cut(const EnvConfig& env,
                                                std::shared_ptr<const ModelProfile> profile,
                                                const SweepSection& sweep, std::uint64_t seed);

struct SplitPairRow {
  int vehicles = 0;
  SplitPair split;
  double total_energy_j = 0.0;
  double max_latency_s = 0.0;
  /// energy_weight * total energy + latency_weight * max latency.
  double weighted = 0.0;
};

/// Every allowed pair applied to all vehicles with equal shares, for every
/// vehicle count.
std::vector<SplitPairRow> consumption_by_split(const EnvConfig& env,
                                               std::shared_ptr<const ModelProfile> profile,
                                               const SweepSection& sweep, std::uint64_t seed);

}  // namespace usfl
