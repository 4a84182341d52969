// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "usfl/error.hpp"
#include "usfl/radio.hpp"

using namespace usfl;
using usfl::testing::rel_err;

namespace {

MobilityTrace trace_at(double l0, double stay) {
  return MobilityTrace{10.0, 200.0, l0, 10.0, stay};
}

double gain_oracle(double d, double carrier) {
  const double pl_db = 20.0 * std::log10(d) + 20.0 * std::log10(carrier) - 147.55;
  return std::pow(10.0, -pl_db / 10.0);
}

}  // namespace

TEST_CASE("distance follows the approach and departure branches") {
  CHECK(rel_err(distance(trace_at(50.0, 15.0), 2.0), std::sqrt(1000.0)) < 1e-12);
  CHECK(rel_err(distance(trace_at(150.0, 5.0), 1.0), std::sqrt(3700.0)) < 1e-12);
  CHECK(distance(trace_at(100.0, 10.0), 0.0) == 10.0);
  CHECK_THROWS_AS(distance(trace_at(50.0, 15.0), 15.5), InvalidArgument);
  CHECK_THROWS_AS(distance(trace_at(50.0, 15.0), -0.1), InvalidArgument);

  const MobilityTrace full = trace_at(0.0, 20.0);
  for (int k = 0; k <= 200; ++k) {
    const double t = 0.1 * k;
    CHECK(distance(full, t) >= 10.0);
    CHECK(distance(full, t) == doctest::Approx(distance(full, 20.0 - t)).epsilon(1e-12));
  }
}

TEST_CASE("log-distance gain and Shannon rate") {
  RadioParams radio;
  const double g = gain_oracle(10.0, 2.4e9);
  CHECK(rel_err(path_loss_db(10.0, 2.4e9),
                20.0 + 20.0 * std::log10(2.4e9) - 147.55) < 1e-12);
  CHECK(path_loss_db(10.0, 2.4e9) == doctest::Approx(60.054).epsilon(1e-4));
  CHECK(rel_err(channel_gain(radio, 10.0), g) < 1e-12);
  CHECK(g == doctest::Approx(9.876e-7).epsilon(1e-3));

  const double snr = 0.2 * g / 1e-10;
  CHECK(snr == doctest::Approx(1975.2).epsilon(1e-3));
  const double r = link_rate(radio, Direction::uplink, 1e7, 10.0);
  CHECK(rel_err(r, 1e7 * std::log2(1.0 + snr)) < 1e-12);
  CHECK(r == doctest::Approx(1.095e8).epsilon(1e-3));

  const double down = link_rate(radio, Direction::downlink, 4e7, 10.0);
  CHECK(rel_err(down, 4e7 * std::log2(1.0 + 2.0 * g / 1e-10)) < 1e-12);

  RadioParams unit = radio;
  unit.noise_power = 0.2 * g;
  CHECK(rel_err(link_rate(unit, Direction::uplink, 3e6, 10.0), 3e6) < 1e-12);
}

TEST_CASE("power-law gain mode") {
  RadioParams radio;
  radio.gain_model = GainModel::power_law;
  radio.unit_gain = 1e-3;
  radio.pathloss_exponent = 3.0;
  CHECK(rel_err(channel_gain(radio, 20.0), 1e-3 * std::pow(20.0, -3.0)) < 1e-12);
}

TEST_CASE("link rate is monotone in bandwidth and distance") {
  RadioParams radio;
  double prev = 0.0;
  for (double b = 1e5; b <= 2e7; b *= 1.7) {
    const double r = link_rate(radio, Direction::uplink, b, 30.0);
    CHECK(r > prev);
    prev = r;
  }
  prev = INFINITY;
  for (double d = 10.0; d <= 150.0; d += 7.0) {
    const double r = link_rate(radio, Direction::uplink, 1e7, d);
    CHECK(r < prev);
    prev = r;
  }
  CHECK_THROWS_AS(link_rate(radio, Direction::uplink, 0.0, 30.0), InvalidArgument);
  CHECK_THROWS_AS(link_rate(radio, Direction::uplink, 1e6, 0.0), InvalidArgument);
}

TEST_CASE("average rate matches an independent trapezoid and is step-stable") {
  RadioParams radio;
  const MobilityTrace trace = trace_at(0.0, 20.0);
  const double step = default_rate_step(trace);
  CHECK(step == doctest::Approx(0.02));

  // Independent composite trapezoid, including a partial last interval.
  const MobilityTrace partial = trace_at(30.0, 13.37);
  const double h = 0.25;
  double integral = 0.0;
  double t = 0.0;
  while (t < partial.stay_time) {
    const double t1 = std::min(t + h, partial.stay_time);
    integral += 0.5 * (t1 - t) *
                (link_rate(radio, Direction::uplink, 1e7, distance(partial, t)) +
                 link_rate(radio, Direction::uplink, 1e7, distance(partial, t1)));
    t = t1;
  }
  CHECK(rel_err(average_rate(radio, Direction::uplink, 1e7, partial, h),
                integral / partial.stay_time) < 1e-12);

  const double coarse = average_rate(radio, Direction::uplink, 1e7, trace, step);
  const double fine = average_rate(radio, Direction::uplink, 1e7, trace, step / 2.0);
  CHECK(rel_err(fine, coarse) < 1e-3);

  const double lo = link_rate(radio, Direction::uplink, 1e7, 100.0 * std::sqrt(1.01));
  const double hi = link_rate(radio, Direction::uplink, 1e7, 10.0);
  CHECK(coarse > lo);
  CHECK(coarse < hi);

  RadioParams flat = radio;
  flat.gain_model = GainModel::power_law;
  flat.pathloss_exponent = 0.0;
  CHECK(rel_err(average_rate(flat, Direction::uplink, 1e7, trace, step),
                link_rate(flat, Direction::uplink, 1e7, 42.0)) < 1e-12);

  CHECK_THROWS_AS(average_rate(radio, Direction::uplink, 1e7, trace, 0.0), InvalidArgument);
}

TEST_CASE("trace validation") {
  CHECK_THROWS_AS(trace_at(0.0, 25.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(trace_at(-1.0, 5.0).validate(), InvalidArgument);
  CHECK_NOTHROW(trace_at(0.0, 20.0).validate());
  const MobilityTrace full = full_stay_trace(10.0, 200.0, 50.0, 10.0);
  CHECK(full.stay_time == doctest::Approx(15.0));
}
