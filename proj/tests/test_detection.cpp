// Copyright 2026 The qionsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include "doctest.h"
#include "qionsim/common.hpp"
#include "qionsim/detection.hpp"

using namespace qionsim;
using namespace qionsim::detection;

namespace {

struct Sample {
  double mean = 0.0;
  double std_error = 0.0;  // of the mean, from the sample spread
};

Sample mean_estimate(double p_up, int runs, std::uint64_t photons, std::uint64_t seed,
                     const BaDetectionConfig& config = {}) {
  double sum = 0.0, sq = 0.0;
  for (int r = 0; r < runs; ++r) {
    Rng rng = Rng::stream(seed, "estimator", static_cast<std::uint64_t>(r));
    const double p =
        estimate_population(run_until_photons(constant_preparation(p_up), photons, config, rng))
            .p_up;
    sum += p;
    sq += p * p;
  }
  const double mean = sum / runs;
  const double var = (sq - runs * mean * mean) / (runs - 1);
  return {mean, std::sqrt(var / runs)};
}

}  // namespace

TEST_CASE("dark shots produce no photons") {
  BaDetectionConfig c;
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    CHECK(ba_detection_shot(1, Polarization::sigma_plus, c, rng).photons == 0);
    CHECK(ba_detection_shot(0, Polarization::sigma_minus, c, rng).photons == 0);
  }
}

TEST_CASE("shots pump into the dark state of the polarization") {
  BaDetectionConfig c;
  Rng rng(2);
  CHECK(ba_detection_shot(0, Polarization::sigma_plus, c, rng).post_state == 1);
  CHECK(ba_detection_shot(1, Polarization::sigma_minus, c, rng).post_state == 0);
}

TEST_CASE("bright click probability matches the generating function") {
  BaDetectionConfig c;
  // Geometric N on {1, 2, ...} with mean 3, thinned at 0.08.
  double closed = 0.0, miss = 1.0;
  for (int n = 1; n < 400; ++n) {
    const double pn = std::pow(2.0 / 3.0, n - 1) / 3.0;
    closed += pn * (1.0 - std::pow(0.92, n));
    miss -= pn;
  }
  CHECK(miss < 1e-12);
  CHECK(c.bright_click_probability() == doctest::Approx(closed).epsilon(1e-12));
  CHECK(c.bright_click_probability() == doctest::Approx(0.206896551724).epsilon(1e-9));

  Rng rng(3);
  const int shots = 200000;
  int clicks = 0;
  for (int k = 0; k < shots; ++k)
    clicks += ba_detection_shot(0, Polarization::sigma_plus, c, rng).photons > 0;
  const double p = closed, sigma = std::sqrt(p * (1 - p) / shots);
  CHECK(std::abs(clicks / double(shots) - p) < 4 * sigma);
}

TEST_CASE("degenerate config gives exactly three photons") {
  BaDetectionConfig c;
  c.photon_detect_prob = 1.0;
  c.photon_number = PhotonNumber::fixed;
  Rng rng(4);
  for (int k = 0; k < 100; ++k)
    CHECK(ba_detection_shot(1, Polarization::sigma_minus, c, rng).photons == 3);
}

TEST_CASE("always-down preparation tallies 0.24 photons per cycle") {
  BaDetectionConfig c;
  CHECK(c.mean_detected_bright() == doctest::Approx(0.24));
  Rng rng(5);
  const std::size_t cycles = 100000;
  const auto t = run_alternating_detection(constant_preparation(0.0), cycles, c, rng);
  CHECK(t.n_sigma_minus == 0);
  CHECK(t.shots == cycles);
  // Var of one bright shot: thinned geometric, Var = m q (1 - q) + q^2 Var(N).
  const double var = 3 * 0.08 * 0.92 + 0.08 * 0.08 * 6.0;
  CHECK(std::abs(t.n_sigma_plus / double(cycles) - 0.24) < 4 * std::sqrt(var / cycles));
}

TEST_CASE("300 photons need about 1250 bright-equivalent shots") {
  BaDetectionConfig c;
  Rng rng(6);
  double shots = 0.0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r)
    shots += run_until_photons(constant_preparation(0.5), 300, c, rng).shots;
  // Each cycle has one bright-equivalent shot at p_up = 0.5.
  CHECK(shots / runs == doctest::Approx(1250.0).epsilon(0.03));
}

TEST_CASE("estimate_population examples") {
  CycleTally t;
  t.n_sigma_plus = 150;
  t.n_sigma_minus = 150;
  CHECK(estimate_population(t).p_up == doctest::Approx(0.5));
  t.n_sigma_plus = 300;
  t.n_sigma_minus = 0;
  CHECK(estimate_population(t).p_up == doctest::Approx(0.0));
  CHECK(estimate_population(t).total_photons == 300);
  CHECK_THROWS_AS(estimate_population(CycleTally{}), NoDataError);
}

TEST_CASE("detection is deterministic given the seed") {
  BaDetectionConfig c;
  Rng a(77), b(77);
  const auto ta = run_alternating_detection(constant_preparation(0.3), 500, c, a);
  const auto tb = run_alternating_detection(constant_preparation(0.3), 500, c, b);
  CHECK(ta.n_sigma_plus == tb.n_sigma_plus);
  CHECK(ta.n_sigma_minus == tb.n_sigma_minus);
}

TEST_CASE("estimator is unbiased across p_up") {
  const int runs = 10000;
  for (double p : {0.1, 0.5, 0.8}) {
    CAPTURE(p);
    const auto s = mean_estimate(p, runs, 300, 11);
    CHECK(std::abs(s.mean - p) < 3 * s.std_error);
  }
}

TEST_CASE("polarization swap symmetry") {
  // Relabeling sigma+/sigma- with up/down maps p to 1 - p.
  const int runs = 4000;
  const auto a = mean_estimate(0.3, runs, 300, 21);
  const auto b = mean_estimate(0.7, runs, 300, 22);
  CHECK(std::abs(a.mean - (1.0 - b.mean)) < 3 * std::hypot(a.std_error, b.std_error));
}

TEST_CASE("std_error falls as one over root N") {
  std::vector<double> log_n, log_s;
  for (std::uint64_t n : {100u, 300u, 1000u, 3000u, 10000u}) {
    CycleTally t;
    t.n_sigma_minus = n / 2;
    t.n_sigma_plus = n - n / 2;
    const auto e = estimate_population(t);
    if (!log_s.empty()) CHECK(std::log(e.std_error) < log_s.back());
    log_n.push_back(std::log(double(n)));
    log_s.push_back(std::log(e.std_error));
  }
  const double slope = (log_s.back() - log_s.front()) / (log_n.back() - log_n.front());
  CHECK(slope == doctest::Approx(-0.5).scale(0).epsilon(0.05));
}

TEST_CASE("RMS error at a 300-photon budget") {
  BaDetectionConfig c;
  Rng rng(31);
  double sq = 0.0;
  const int runs = 4000;
  for (int r = 0; r < runs; ++r) {
    const double e =
        estimate_population(run_until_photons(constant_preparation(0.5), 300, c, rng)).p_up - 0.5;
    sq += e * e;
  }
  const double rms = std::sqrt(sq / runs);
  CHECK(rms >= 0.03);
  CHECK(rms <= 0.06);
}

TEST_CASE("alternating schedule cancels a slow drift") {
  BaDetectionConfig c;
  const std::size_t cycles = 5000;
  DetectionOptions opts;
  // Monotone ramp from -10% to +10% over the run: half a period from the
  // minimum.
  opts.drift.amplitude = 0.1;
  opts.drift.period_shots = 2.0 * 2.0 * cycles;
  opts.drift.phase = -0.5 * constants::pi;
  auto bias = [&](Schedule s) {
    opts.schedule = s;
    double sum = 0.0;
    const int runs = 200;
    for (int r = 0; r < runs; ++r) {
      Rng rng = Rng::stream(41, "drift-test", static_cast<std::uint64_t>(r));
      sum += estimate_population(
                 run_alternating_detection(constant_preparation(0.5), cycles, c, rng, opts))
                 .p_up;
    }
    return sum / runs - 0.5;
  };
  const double alt = std::abs(bias(Schedule::alternating));
  const double blocked = std::abs(bias(Schedule::blocked));
  CHECK(alt < 0.01);
  CHECK(blocked > 0.01);
  // Each half averages the collection to 1 -+ 2A/pi, so the blocked estimate
  // is 1/2 - A/pi. Tolerance is ~4 standard errors of the 200-run mean.
  CHECK(blocked == doctest::Approx(0.1 / constants::pi).scale(0).epsilon(0.15));
}

TEST_CASE("Yb detection") {
  Rng rng(51);
  auto up = qsim::QuantumState(qsim::HilbertSpec({qsim::Subsystem::qubit()}),
                               qsim::Matrix{{0.0, 0.0}, {0.0, 1.0}});
  CHECK(yb_detect(up, 0, 0.0, rng) == 1);
  int flips = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) flips += yb_detect(up, 0, 0.01, rng) == 0;
  CHECK(std::abs(flips / double(n) - 0.01) < 4 * std::sqrt(0.01 * 0.99 / n));
  auto mixed = qsim::QuantumState(qsim::HilbertSpec({qsim::Subsystem::qubit()}),
                                  qsim::Matrix{{0.7, 0.0}, {0.0, 0.3}});
  int ones = 0;
  for (int k = 0; k < n; ++k) ones += yb_detect(mixed, 0, 0.0, rng);
  CHECK(std::abs(ones / double(n) - 0.3) < 4 * std::sqrt(0.21 / n));
  CHECK_THROWS_AS(yb_detect(up, 3, 0.0, rng), DimensionError);
}

TEST_CASE("config validation") {
  BaDetectionConfig c;
  c.photon_detect_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.mean_scattered_photons = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(constant_preparation(-0.1), ConfigError);
}
