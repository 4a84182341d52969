// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/radio.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "usfl/error.hpp"

namespace usfl {

void MobilityTrace::validate() const {
  if (!(es_height > 0.0)) throw InvalidArgument("trace: es_height must be > 0");
  if (!(coverage_diameter > 0.0)) throw InvalidArgument("trace: coverage_diameter must be > 0");
  if (!(initial_position >= 0.0 && initial_position <= coverage_diameter)) {
    throw InvalidArgument("trace: initial_position must lie in [0, coverage_diameter]");
  }
  if (!(speed > 0.0)) throw InvalidArgument("trace: speed must be > 0");
  // Relative slack so a trace built from max_stay_time() validates.
  if (!(stay_time > 0.0) || stay_time > max_stay_time() * (1.0 + 1e-12)) {
    throw InvalidArgument("trace: stay_time must lie in (0, (d_c - l0)/V] = (0, " +
                          std::to_string(max_stay_time()) + "]");
  }
}

MobilityTrace full_stay_trace(double es_height, double coverage_diameter,
                              double initial_position, double speed) {
  MobilityTrace t{es_height, coverage_diameter, initial_position, speed, 0.0};
  t.stay_time = t.max_stay_time();
  t.validate();
  return t;
}

void RadioParams::validate() const {
  if (!(uplink_bandwidth > 0.0 && downlink_bandwidth > 0.0)) {
    throw InvalidArgument("radio: bandwidths must be > 0");
  }
  if (!(tx_power_vu > 0.0 && tx_power_es > 0.0 && rx_power_vu > 0.0 && noise_power > 0.0)) {
    throw InvalidArgument("radio: powers must be > 0");
  }
  if (!(carrier_hz > 0.0)) throw InvalidArgument("radio: carrier_hz must be > 0");
  if (gain_model == GainModel::power_law && !(unit_gain > 0.0)) {
    throw InvalidArgument("radio: unit_gain must be > 0");
  }
}

double distance(const MobilityTrace& trace, double t) {
  if (!(t >= 0.0 && t <= trace.stay_time)) {
    throw InvalidArgument("distance: t=" + std::to_string(t) + " outside [0, stay_time]");
  }
  const double half = trace.coverage_diameter / 2.0;
  const double l0 = trace.initial_position;
  const double along = (l0 <= half) ? (half - l0 - trace.speed * t)
                                    : (l0 - half + trace.speed * t);
  return std::sqrt(trace.es_height * trace.es_height + along * along);
}

double path_loss_db(double d, double carrier_hz) {
  return 20.0 * std::log10(d) + 20.0 * std::log10(carrier_hz) - 147.55;
}

double channel_gain(const RadioParams& params, double d) {
  switch (params.gain_model) {
    case GainModel::log_distance:
      return std::pow(10.0, -path_loss_db(d, params.carrier_hz) / 10.0);
    case GainModel::power_law:
      return params.unit_gain * std::pow(d, -params.pathloss_exponent);
  }
  return 0.0;
}

double spectral_efficiency(const RadioParams& params, Direction direction, double d) {
  if (!(d > 0.0)) throw InvalidArgument("link rate: distance must be > 0");
  const double p = direction == Direction::uplink ? params.tx_power_vu : params.tx_power_es;
  return std::log2(1.0 + p * channel_gain(params, d) / params.noise_power);
}

double link_rate(const RadioParams& params, Direction direction, double bandwidth,
                 double d) {
  if (!(bandwidth > 0.0)) throw InvalidArgument("link rate: bandwidth must be > 0");
  return bandwidth * spectral_efficiency(params, direction, d);
}

double average_spectral_efficiency(const RadioParams& params, Direction direction,
                                   const MobilityTrace& trace, double step) {
  if (!(step > 0.0 && step <= trace.stay_time)) {
    throw InvalidArgument("average rate: step must lie in (0, stay_time]");
  }
  const double T = trace.stay_time;
  auto f = [&](double t) {
    return spectral_efficiency(params, direction, distance(trace, std::min(t, T)));
  };
  const auto full = static_cast<long>(std::floor(T / step));
  double integral = 0.0;
  double prev = f(0.0);
  for (long k = 1; k <= full; ++k) {
    const double cur = f(static_cast<double>(k) * step);
    integral += 0.5 * step * (prev + cur);
    prev = cur;
  }
  const double tail = T - static_cast<double>(full) * step;
  if (tail > 0.0) integral += 0.5 * tail * (prev + f(T));
  return integral / T;
}

double average_rate(const RadioParams& params, Direction direction, double bandwidth,
                    const MobilityTrace& trace, double step) {
  if (!(bandwidth > 0.0)) throw InvalidArgument("average rate: bandwidth must be > 0");
  return bandwidth * average_spectral_efficiency(params, direction, trace, step);
}

double default_rate_step(const MobilityTrace& trace) { return trace.stay_time / 1000.0; }

}  // namespace usfl
