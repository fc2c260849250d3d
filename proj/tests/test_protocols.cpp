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
#include "qionsim/protocols.hpp"

using namespace qionsim;
using namespace qionsim::protocols;
using qsim::Matrix;
using qsim::Vector;

namespace {

NodeModel cold_model() {
  NodeModel m;
  m.eit.target_nbar_op = 0.0;
  m.eit.target_nbar_ip = 0.0;
  return m;
}

std::vector<double> durations(const NodeModel& m, int points, double cycles) {
  std::vector<double> t;
  const double rabi = m.rabi_hz(m.ba_index());
  for (int k = 0; k < points; ++k) t.push_back(cycles / rabi * k / points);
  return t;
}

std::vector<double> phase_grid(int points) {
  std::vector<double> p;
  for (int k = 0; k < points; ++k) p.push_back(constants::two_pi * k / points);
  return p;
}

double cz_efficiency(const NodeModel& m, const CzConfig& cz, const gates::NoiseConfig& noise) {
  Rng rng(1);
  return cz_transfer_sweep(durations(m, 16, 1.0), m, cz, noise, rng).efficiency;
}

double ms_fidelity(double heating, double gate_time = MsConfig{}.gate_time_s) {
  gates::NoiseConfig noise = gates::NoiseConfig::off();
  noise.heating_rate_per_ms = heating;
  MsConfig ms;
  ms.gate_time_s = gate_time;
  return ms_parity_scan(phase_grid(16), NodeModel{}, ms, noise).fidelity;
}

}  // namespace

TEST_CASE("ideal preparation is the pure ground state") {
  const auto p = prepare(cold_model(), 0.0);
  Vector ground = Vector::Zero(static_cast<Eigen::Index>(p.node.state.spec().dim()));
  ground(0) = 1.0;
  CHECK(qsim::fidelity(p.node.state, ground) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.eta.size() == 2);
}

TEST_CASE("default preparation puts the OP mode at nbar 0.06") {
  const auto p = prepare(NodeModel{}, 0.0);
  CHECK(p.nbar == doctest::Approx(0.06));
  CHECK(p.mode.label == "OP");
  const auto motion = qsim::partial_trace(p.node.state, {p.node.mode(0)});
  CHECK(motion.rho()(0, 0).real() == doctest::Approx(1.0 / 1.06).epsilon(1e-9));
  NodeModel ip;
  ip.mode.label = "IP";
  CHECK(prepare(ip, 0.0).nbar == doctest::Approx(0.1));
}

TEST_CASE("sampled SPAM flips each qubit at the configured rate") {
  Rng rng(2);
  const int n = 20000;
  int flips_ba = 0, flips_yb = 0;
  const NodeModel m = cold_model();
  for (int k = 0; k < n; ++k) {
    const auto p = prepare(m, 0.01, &rng);
    flips_ba += qsim::populations(p.node.state, p.node.qubit(0))[1] > 0.5;
    flips_yb += qsim::populations(p.node.state, p.node.qubit(1))[1] > 0.5;
  }
  const double tol = 4 * std::sqrt(0.01 * 0.99 / n);
  CHECK(std::abs(flips_ba / double(n) - 0.01) < tol);
  CHECK(std::abs(flips_yb / double(n) - 0.01) < tol);
  // Without an rng the flip is a mixture.
  const auto mixed = prepare(m, 0.01);
  CHECK(qsim::populations(mixed.node.state, mixed.node.qubit(0))[1] == doctest::Approx(0.01));
}

TEST_CASE("ideal CZ transfer follows the carrier curve") {
  const NodeModel m = cold_model();
  const auto off = gates::NoiseConfig::off();
  Rng rng(3);
  CHECK(cz_transfer(0.0, m, CzConfig{}, off, rng).p_up == doctest::Approx(0.0));
  const double rabi = m.rabi_hz(m.ba_index());
  for (double t : durations(m, 12, 1.5)) {
    const double s = std::sin(constants::pi * rabi * t);
    CHECK(cz_transfer(t, m, CzConfig{}, off, rng).p_up == doctest::Approx(s * s).epsilon(1e-9));
  }
  CHECK(cz_efficiency(m, CzConfig{}, off) >= 0.999);
}

TEST_CASE("calibrated CZ efficiency") {
  const double e = cz_efficiency(NodeModel{}, CzConfig{}, gates::NoiseConfig{});
  CHECK(e >= 0.70);
  CHECK(e <= 0.80);
}

TEST_CASE("CZ efficiency falls strictly with nbar") {
  double last = 2.0;
  for (double nbar : {0.0, 0.06, 0.3, 1.0}) {
    NodeModel m;
    m.eit.target_nbar_op = nbar;
    const double e = cz_efficiency(m, CzConfig{}, gates::NoiseConfig::off());
    CAPTURE(nbar);
    CHECK(e < last);
    last = e;
  }
}

TEST_CASE("CZ curve stays sinusoidal at the carrier frequency under noise") {
  for (double nbar : {0.06, 1.0}) {
    NodeModel m;
    m.eit.target_nbar_op = nbar;
    // Heating, SPAM and pulse-area errors only rescale the fringe.
    gates::NoiseConfig noise;
    noise.scatter_per_rabi_cycle = 0.0;
    noise.crosstalk.mode = gates::CrosstalkMode::off;
    Rng rng(4);
    const auto sweep = cz_transfer_sweep(durations(m, 8, 1.0), m, CzConfig{}, noise, rng);
    CHECK(sweep.fit.residual_rms < 1e-9);
    // Scattering grows with the pulse length and crosstalk adds a slow
    // rotation of Yb; both stay tiny next to the fringe.
    const auto full = cz_transfer_sweep(durations(m, 8, 1.0), m, CzConfig{}, gates::NoiseConfig{}, rng);
    CHECK(full.fit.residual_rms < 1e-3 * full.fit.amplitude);
  }
}

TEST_CASE("sampled CZ readout agrees with the ensemble value") {
  const NodeModel m;
  Rng rng(5);
  const double t = 0.5 / m.rabi_hz(m.ba_index());
  const auto p = cz_transfer(t, m, CzConfig{}, gates::NoiseConfig{}, rng, 20000);
  REQUIRE(p.p_up_sampled.has_value());
  CHECK(std::abs(*p.p_up_sampled - p.p_up) < 4 * std::sqrt(0.25 / 20000));
}

TEST_CASE("optical phase jitter degrades CZ but not MS") {
  const NodeModel m = cold_model();
  const auto off = gates::NoiseConfig::off();
  Rng rng(6);
  CzConfig stable, jittery;
  jittery.optical_phase_jitter_rad = 1.0;
  const double c0 = cz_coherence_transfer(m, stable, off, rng);
  const double c1 = cz_coherence_transfer(m, jittery, off, rng, 256);
  CHECK(c0 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(c1 < 0.7);
  // The MS scan has no optical-phase input at all; its noise-off result is ideal.
  CHECK(ms_fidelity(0.0) >= 1.0 - 1e-6);
}

TEST_CASE("noise-off parity scan") {
  const auto scan = ms_parity_scan(phase_grid(16), NodeModel{}, MsConfig{}, gates::NoiseConfig::off());
  CHECK(scan.parity_amplitude == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(scan.fidelity >= 1.0 - 1e-6);
  CHECK(scan.bell_fidelity >= 1.0 - 1e-6);
  CHECK(scan.populations[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(scan.populations[3] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(scan.fit.residual_rms < 1e-9);
}

TEST_CASE("parity fringe position follows the force phase") {
  for (double force : {0.0, 0.7, 2.0}) {
    MsConfig ms;
    ms.force_phase = force;
    ms.ba_analysis_phase = 0.4;
    const auto phases = phase_grid(12);
    const auto scan = ms_parity_scan(phases, NodeModel{}, ms, gates::NoiseConfig::off());
    // Oracle: rotate the ideal Bell state directly.
    const Vector bell = ms_target_state(force);
    for (std::size_t k = 0; k < phases.size(); ++k) {
      Matrix rot(4, 4);
      const Matrix rb = qsim::ops::rotation(0.5 * constants::pi, ms.ba_analysis_phase);
      const Matrix ry = qsim::ops::rotation(0.5 * constants::pi, phases[k]);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) rot(2 * i + a, 2 * j + b) = rb(i, j) * ry(a, b);
      const Vector out = rot * bell;
      const double parity = std::norm(out(0)) + std::norm(out(3)) - std::norm(out(1)) -
                            std::norm(out(2));
      CHECK(scan.parity[k] == doctest::Approx(parity).epsilon(1e-6));
    }
  }
}

TEST_CASE("MS fidelity at the calibrated gate time and default heating") {
  const double f = ms_fidelity(5.0);
  CHECK(f >= 0.55);
  CHECK(f <= 0.65);
}

TEST_CASE("MS fidelity is non-increasing in the heating rate") {
  double last = 2.0;
  for (double rate : {0.0, 1.0, 5.0, 10.0}) {
    const double f = ms_fidelity(rate);
    CAPTURE(rate);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    CHECK(f <= last);
    last = f;
  }
}

TEST_CASE("Ramsey contrast") {
  CoherenceModel model;
  CHECK(ramsey(Qubit::ba, 0.0, model).contrast == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ramsey(Qubit::ba, 100e-6, model).contrast == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(ramsey(Qubit::yb, 1.5, model).contrast == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  RamseyOptions lit;
  lit.ba_illumination = true;
  for (double d : {0.0, 0.3, 1.5, 4.0})
    CHECK(ramsey(Qubit::yb, d, model, lit).contrast ==
          doctest::Approx(ramsey(Qubit::yb, d, model).contrast).epsilon(1e-15));
  CHECK_THROWS_AS(ramsey(Qubit::ba, -1.0, model), ConfigError);
}

TEST_CASE("Ramsey 1/e times") {
  CoherenceModel model;
  CHECK(ramsey_1e_time(Qubit::ba, model) == doctest::Approx(100e-6).scale(0).epsilon(1e-6));
  CHECK(ramsey_1e_time(Qubit::yb, model) == doctest::Approx(1.5).epsilon(1e-6));
  model.compensation_enabled = true;
  CHECK(ramsey_1e_time(Qubit::ba, model) == doctest::Approx(4e-3).scale(0).epsilon(1e-6));
}

TEST_CASE("Ramsey contrast is non-increasing in delay") {
  CoherenceModel model;
  for (auto q : {Qubit::ba, Qubit::yb}) {
    const double t2 = q == Qubit::ba ? model.ba_t2_s() : model.yb_t2_s;
    double last = 2.0;
    for (int k = 0; k <= 40; ++k) {
      const double c = ramsey(q, 3.0 * t2 * k / 40.0, model).contrast;
      CHECK(c <= last + 1e-12);
      last = c;
    }
  }
  // Decay shapes: Gaussian on Ba, exponential on Yb.
  CHECK(coherence_factor(Qubit::ba, 2 * 100e-6, model) == doctest::Approx(std::exp(-4.0)));
  CHECK(coherence_factor(Qubit::yb, 3.0, model) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("no leakage without a shelving probability") {
  LeakageModel model;
  Rng rng(7);
  auto node = prepare(NodeModel{}, 0.0).node;
  std::vector<double> times;
  for (int k = 0; k < 1000; ++k) times.push_back(k * 1e-3);
  const auto out = leakage_step(node, 0, times, 0.0, 1.0, model, rng);
  CHECK(out.shelving_events == 0);
  CHECK(out.node.available[0]);
  REQUIRE(out.timeline.size() == 1);
  CHECK(out.timeline[0].available);
}

TEST_CASE("mean recovery time with and without the LED") {
  for (bool led : {true, false}) {
    LeakageModel model;
    model.led_on = led;
    const double expected = led ? 0.030 : 32.0;
    Rng rng(8);
    double sum = 0;
    const int n = 10000;
    auto node = prepare(NodeModel{}, 0.0).node;
    node.available[0] = false;
    for (int k = 0; k < n; ++k) {
      const auto out = leakage_step(node, 0, {}, 0.0, 1e6, model, rng);
      REQUIRE(out.recovery_times_s.size() == 1);
      sum += out.recovery_times_s[0];
    }
    CHECK(sum / n == doctest::Approx(expected).scale(0).epsilon(0.04));
  }
}

TEST_CASE("availability timeline tiles the window") {
  LeakageModel model;
  model.shelve_prob_per_scatter = 0.3;
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> times;
    for (int k = 0; k < 40; ++k) times.push_back(2.0 + 0.01 * k);
    auto node = prepare(NodeModel{}, 0.0).node;
    const auto out = leakage_step(node, 0, times, 2.0, 2.5, model, rng);
    double covered = 0.0, cursor = 2.0;
    for (const auto& seg : out.timeline) {
      CHECK(seg.start_s == doctest::Approx(cursor));
      CHECK(seg.end_s >= seg.start_s);
      covered += seg.end_s - seg.start_s;
      cursor = seg.end_s;
    }
    CHECK(covered == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.node.available[0] == out.timeline.back().available);
    CHECK(out.pending_recovery_s.has_value() == !out.node.available[0]);
  }
}

TEST_CASE("shelved Ba blocks gates") {
  auto node = prepare(cold_model(), 0.0).node;
  node.available[0] = false;
  gates::PulseParams p;
  p.target = 0;
  p.rabi_freq_hz = 1e5;
  p.duration_s = 5e-6;
  const auto out = gates::carrier(node, p, gates::NoiseConfig::off());
  CHECK((out.state.rho() - node.state.rho()).norm() < 1e-15);
}

TEST_CASE("model validation") {
  CoherenceModel c;
  c.yb_t2_s = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  LeakageModel l;
  l.shelve_prob_per_scatter = 2.0;
  CHECK_THROWS_AS(l.validate(), ConfigError);
  EITCoolingModel e;
  e.target_nbar_op = -1.0;
  CHECK_THROWS_AS(e.validate(), ConfigError);
  MsConfig ms;
  ms.gate_time_s = 0.0;
  CHECK_THROWS_AS(ms.validate(), ConfigError);
}
