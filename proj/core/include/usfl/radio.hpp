// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Mobility-dependent channel model. A vehicle drives past a roadside edge
// server at constant speed; its distance, the Shannon rate of each link and
// the rate averaged over the vehicle's stay in coverage.

#pragma once

namespace usfl {

struct MobilityTrace {
  double es_height = 10.0;           // m
  double coverage_diameter = 200.0;  // m
  double initial_position = 0.0;     // m along the road, 0 = coverage entry
  double speed = 10.0;               // m/s
  double stay_time = 20.0;           // s

  /// Longest admissible stay: time to reach the far coverage edge.
  double max_stay_time() const { return (coverage_diameter - initial_position) / speed; }
  void validate() const;
};

/// Builds a trace that stays until the coverage edge.
MobilityTrace full_stay_trace(double es_height, double coverage_diameter,
                              double initial_position, double speed);

enum class Direction { uplink, downlink };

enum class GainModel {
  log_distance,  // PL(dB) = 20 log10(d) + 20 log10(f_c) - 147.55
  power_law,     // g = h0 * d^-alpha
};

struct RadioParams {
  double uplink_bandwidth = 10e6;    // Hz, the vehicle's allocation
  double downlink_bandwidth = 40e6;  // Hz
  double tx_power_vu = 0.2;          // W
  double tx_power_es = 2.0;          // W
  double rx_power_vu = 0.1;          // W
  double noise_power = 1e-10;        // W
  double carrier_hz = 2.4e9;
  GainModel gain_model = GainModel::log_distance;
  double unit_gain = 1e-3;         // h0, power_law only
  double pathloss_exponent = 3.0;  // alpha, power_law only

  void validate() const;
};

/// Distance to the edge server `t` seconds into the stay.
double distance(const MobilityTrace& trace, double t);

double path_loss_db(double d, double carrier_hz);
double channel_gain(const RadioParams& params, double d);

/// log2(1 + P g(d) / N0) for the given direction.
double spectral_efficiency(const RadioParams& params, Direction direction, double d);

/// Instantaneous rate, bit/s.
double link_rate(const RadioParams& params, Direction direction, double bandwidth,
                 double d);

/// Time average of the spectral efficiency over [0, stay_time], composite
/// trapezoid with the given step (last interval shortened to end exactly at
/// stay_time). Rates are linear in bandwidth, so average_rate = B * this.
double average_spectral_efficiency(const RadioParams& params, Direction direction,
                                   const MobilityTrace& trace, double step);

double average_rate(const RadioParams& params, Direction direction, double bandwidth,
                    const MobilityTrace& trace, double step);

/// Default integration step: stay_time / 1000.
double default_rate_step(const MobilityTrace& trace);

}  // namespace usfl
