// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/cost.hpp"

#include <string>

#include "usfl/error.hpp"

namespace usfl {

void ComputeParams::validate() const {
  if (!(vu_cpu_hz > 0.0 && vu_flops_per_cycle > 0.0 && es_cpu_hz_allocated > 0.0 &&
        es_flops_per_cycle > 0.0 && power_coeff > 0.0)) {
    throw InvalidArgument("compute: all rates and coefficients must be > 0");
  }
  if (batch_size < 1) throw InvalidArgument("compute: batch_size must be >= 1");
}

namespace {

void require_valid_split(const ModelProfile& profile, SplitPair split) {
  if (!(1 <= split.x && split.x < split.y && split.y <= profile.total_layers())) {
    throw InvalidArgument("split " + to_string(split) + " violates 1 <= X < Y <= L");
  }
}

double range_flops(const ModelProfile& profile, int from, int to) {
  return from > to ? 0.0 : profile.cumulative_flops(from, to);
}

}  // namespace

ComputationTimes computation_latency(const ModelProfile& profile, SplitPair split,
                                     const ComputeParams& params, bool with_sae) {
  require_valid_split(profile, split);
  params.validate();
  if (with_sae && !profile.sae()) {
    throw InvalidArgument("computation_latency: SAE requested but profile has none");
  }
  const double b = params.batch_size;
  const double vu = params.vu_flops_per_second();
  const double es = params.es_flops_per_second();
  const int L = profile.total_layers();

  ComputationTimes t;
  t.t_cmp_a = b * range_flops(profile, 1, split.x) / vu;
  t.t_cmp_b = b * range_flops(profile, split.x + 1, split.y) / es;
  t.t_cmp_c = b * range_flops(profile, split.y + 1, L) / vu;
  if (with_sae) {
    t.t_sem_enc = b * profile.sae()->encode_flops / vu;
    t.t_sem_dec = b * profile.sae()->decode_flops / es;
  }
  return t;
}

double computation_energy(const ComputeParams& params, const ComputationTimes& times) {
  const double f = params.vu_cpu_hz;
  return params.power_coeff * f * f * f * times.vu_busy();
}

CommunicationTimes communication_latency(const ModelProfile& profile, SplitPair split,
                                         int batch_size, LinkRates rates, bool with_sae) {
  require_valid_split(profile, split);
  if (!(rates.uplink > 0.0 && rates.downlink > 0.0)) {
    throw InvalidArgument("communication_latency: rates must be > 0");
  }
  if (batch_size < 1) throw InvalidArgument("communication_latency: batch_size must be >= 1");
  const double bits = static_cast<double>(batch_size) * kBitsPerByte;

  CommunicationTimes t;
  t.t_com_fa = bits * profile.smashed_size(split.x, with_sae) / rates.uplink;
  t.t_com_fb = bits * profile.layer(split.y).output_bytes_forward / rates.downlink;
  // Gradients out of part c (layer Y+1) and into part a (layer X+1) are never
  // SAE-encoded. Y = L leaves no part c and nothing to send back.
  const double grad_c =
      split.y < profile.total_layers() ? profile.layer(split.y + 1).grad_bytes_backward : 0.0;
  t.t_com_bc = bits * grad_c / rates.uplink;
  t.t_com_bb = bits * profile.layer(split.x + 1).grad_bytes_backward / rates.downlink;
  return t;
}

double communication_energy(const RadioParams& params, const CommunicationTimes& times) {
  return params.tx_power_vu * (times.t_com_fa + times.t_com_bc) +
         params.rx_power_vu * (times.t_com_fb + times.t_com_bb);
}

CostBreakdown compose_cost(const ComputationTimes& cmp, const CommunicationTimes& com,
                           double e_cmp, double e_com) {
  CostBreakdown c;
  c.t_cmp_a = cmp.t_cmp_a;
  c.t_sem_enc = cmp.t_sem_enc;
  c.t_sem_dec = cmp.t_sem_dec;
  c.t_cmp_b = cmp.t_cmp_b;
  c.t_cmp_c = cmp.t_cmp_c;
  c.t_com_fa = com.t_com_fa;
  c.t_com_fb = com.t_com_fb;
  c.t_com_bc = com.t_com_bc;
  c.t_com_bb = com.t_com_bb;
  c.e_cmp = e_cmp;
  c.e_com = e_com;
  c.t_total = cmp.total() + com.total();
  c.e_total = e_cmp + e_com;
  return c;
}

CostBreakdown round_cost(const ModelProfile& profile, SplitPair split,
                         const ComputeParams& compute, const RadioParams& radio,
                         LinkRates rates, bool with_sae) {
  const auto cmp = computation_latency(profile, split, compute, with_sae);
  const auto com = communication_latency(profile, split, compute.batch_size, rates, with_sae);
  return compose_cost(cmp, com, computation_energy(compute, cmp),
                      communication_energy(radio, com));
}

LinkRates average_link_rates(const RadioParams& radio, const MobilityTrace& trace,
                             double step) {
  return {average_rate(radio, Direction::uplink, radio.uplink_bandwidth, trace, step),
          average_rate(radio, Direction::downlink, radio.downlink_bandwidth, trace, step)};
}

CostBreakdown round_cost(const ModelProfile& profile, SplitPair split,
                         const ComputeParams& compute, const RadioParams& radio,
                         const MobilityTrace& trace, bool with_sae, double step) {
  radio.validate();
  trace.validate();
  const double h = step > 0.0 ? step : default_rate_step(trace);
  return round_cost(profile, split, compute, radio, average_link_rates(radio, trace, h),
                    with_sae);
}

}  // namespace usfl
