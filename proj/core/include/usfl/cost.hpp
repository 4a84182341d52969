// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-round latency and energy of one vehicle for a given split and
// resource share. Profiles store bytes; every payload is converted to bits
// (x8) here and only here.

#pragma once

#include "usfl/profile.hpp"
#include "usfl/radio.hpp"

namespace usfl {

inline constexpr double kBitsPerByte = 8.0;

struct ComputeParams {
  double vu_cpu_hz = 1e9;             // f_v, cycles/s
  double vu_flops_per_cycle = 2.0;    // n_i
  double es_cpu_hz_allocated = 2.5e9; // f_e share for this vehicle
  double es_flops_per_cycle = 16.0;   // n_e
  double power_coeff = 1e-28;         // psi, W/(cycle/s)^3
  int batch_size = 64;

  void validate() const;
  double vu_flops_per_second() const { return vu_cpu_hz * vu_flops_per_cycle; }
  double es_flops_per_second() const { return es_cpu_hz_allocated * es_flops_per_cycle; }
};

struct ComputationTimes {
  double t_cmp_a = 0.0;
  double t_sem_enc = 0.0;
  double t_sem_dec = 0.0;
  double t_cmp_b = 0.0;
  double t_cmp_c = 0.0;

  double total() const { return t_cmp_a + t_sem_enc + t_sem_dec + t_cmp_b + t_cmp_c; }
  /// Time the vehicle's CPU is busy: part a, encoding, part c.
  double vu_busy() const { return t_cmp_a + t_sem_enc + t_cmp_c; }
};

struct CommunicationTimes {
  double t_com_fa = 0.0;  // uplink, part-a activations
  double t_com_fb = 0.0;  // downlink, part-b activations
  double t_com_bc = 0.0;  // uplink, part-c gradients
  double t_com_bb = 0.0;  // downlink, gradients for part a

  double total() const { return t_com_fa + t_com_fb + t_com_bc + t_com_bb; }
};

struct LinkRates {
  double uplink = 0.0;    // bit/s
  double downlink = 0.0;  // bit/s
};

struct CostBreakdown {
  double t_cmp_a = 0.0;
  double t_sem_enc = 0.0;
  double t_sem_dec = 0.0;
  double t_cmp_b = 0.0;
  double t_cmp_c = 0.0;
  double t_com_fa = 0.0;
  double t_com_fb = 0.0;
  double t_com_bc = 0.0;
  double t_com_bb = 0.0;
  double e_cmp = 0.0;
  double e_com = 0.0;
  double t_total = 0.0;
  double e_total = 0.0;

  double computation_latency() const { return t_cmp_a + t_sem_enc + t_sem_dec + t_cmp_b + t_cmp_c; }
  double communication_latency() const { return t_com_fa + t_com_fb + t_com_bc + t_com_bb; }
};

ComputationTimes computation_latency(const ModelProfile& profile, SplitPair split,
                                     const ComputeParams& params, bool with_sae);

/// VU-side energy only: psi * f_v^3 * (part a + encoding + part c).
double computation_energy(const ComputeParams& params, const ComputationTimes& times);

CommunicationTimes communication_latency(const ModelProfile& profile, SplitPair split,
                                         int batch_size, LinkRates rates, bool with_sae);

double communication_energy(const RadioParams& params, const CommunicationTimes& times);

CostBreakdown compose_cost(const ComputationTimes& cmp, const CommunicationTimes& com,
                           double e_cmp, double e_com);

/// Round cost at explicit link rates.
CostBreakdown round_cost(const ModelProfile& profile, SplitPair split,
                         const ComputeParams& compute, const RadioParams& radio,
                         LinkRates rates, bool with_sae);

/// Stay-averaged link rates for the vehicle's current uplink allocation.
LinkRates average_link_rates(const RadioParams& radio, const MobilityTrace& trace,
                             double step);

/// Round cost with rates averaged over the stay. step <= 0 selects
/// default_rate_step(trace).
CostBreakdown round_cost(const ModelProfile& profile, SplitPair split,
                         const ComputeParams& compute, const RadioParams& radio,
                         const MobilityTrace& trace, bool with_sae, double step = 0.0);

}  // namespace usfl
