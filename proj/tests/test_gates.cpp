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

#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "qionsim/common.hpp"
#include "qionsim/gates.hpp"

using namespace qionsim;
using namespace qionsim::gates;
using qsim::Complex;
using qsim::Matrix;
using qsim::Vector;

namespace {

const Complex I(0.0, 1.0);

NodeState ba_yb_node(double nbar = 0.0, int n_max = 10) {
  return make_node({crystal::ba138(), crystal::yb171()}, {qsim::thermal_state(nbar, n_max).state});
}

PulseParams carrier_pulse(std::size_t target, double rabi, double duration, double phase = 0.0) {
  PulseParams p;
  p.target = target;
  p.rabi_freq_hz = rabi;
  p.duration_s = duration;
  p.phase = phase;
  return p;
}

double p_up(const NodeState& n, std::size_t ion) { return qsim::populations(n.state, n.qubit(ion))[1]; }

Matrix spins(const NodeState& n) { return qsim::partial_trace(n.state, {0, 1}).rho(); }

}  // namespace

TEST_CASE("carrier pi pulse flips the qubit") {
  auto n = carrier(ba_yb_node(), carrier_pulse(0, 1e5, 5e-6), NoiseConfig::off());
  CHECK(p_up(n, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p_up(n, 1) == doctest::Approx(0.0));
}

TEST_CASE("carrier Rabi curve over 1.5 cycles") {
  const double rabi = 250e3;
  for (int k = 0; k <= 30; ++k) {
    const double t = 1.5 / rabi * k / 30.0;
    auto n = carrier(ba_yb_node(), carrier_pulse(0, rabi, t), NoiseConfig::off());
    const double s = std::sin(constants::pi * rabi * t);
    CHECK(p_up(n, 0) == doctest::Approx(s * s).epsilon(1e-12));
  }
}

TEST_CASE("crosstalk rotates the other species by the scaled angle") {
  NoiseConfig noise = NoiseConfig::off();
  noise.crosstalk.mode = CrosstalkMode::raw;
  // pi on Yb leaks 0.11 of the Rabi frequency onto Ba.
  auto n = carrier(ba_yb_node(), carrier_pulse(1, 1e5, 5e-6), noise);
  const double s = std::sin(0.5 * constants::pi * 0.11);
  CHECK(p_up(n, 0) == doctest::Approx(s * s).epsilon(1e-12));
  // pi on Ba leaks 0.026 onto Yb.
  auto m = carrier(ba_yb_node(), carrier_pulse(0, 1e5, 5e-6), noise);
  const double r = std::sin(0.5 * constants::pi * 0.026);
  CHECK(p_up(m, 1) == doctest::Approx(r * r).epsilon(1e-12));

  noise.crosstalk.mode = CrosstalkMode::suppressed;
  auto q = carrier(ba_yb_node(), carrier_pulse(1, 1e5, 5e-6), noise);
  const double u = std::sin(0.5 * constants::pi * 0.01);
  CHECK(p_up(q, 0) == doctest::Approx(u * u).epsilon(1e-12));
}

TEST_CASE("crosstalk off leaves the other species untouched") {
  auto start = ba_yb_node(0.06);
  start.state = qsim::apply_unitary(start.state, qsim::ops::rotation(1.1, 0.3), {1});
  auto n = carrier(start, carrier_pulse(0, 2e5, 3.3e-6, 0.7), NoiseConfig::off());
  const auto before = qsim::partial_trace(start.state, {1, 2}).rho();
  const auto after = qsim::partial_trace(n.state, {1, 2}).rho();
  CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scattering depolarizes with the per-cycle probability") {
  NoiseConfig noise = NoiseConfig::off();
  noise.scatter_per_rabi_cycle = 0.01;
  const auto pulse = carrier_pulse(0, 1e5, 10e-6);  // one full cycle
  CHECK(scatter_probability(pulse, noise) == doctest::Approx(0.01));
  auto n = carrier(ba_yb_node(), pulse, noise);
  // Full 2pi rotation returns to down; depolarizing mixes in I/2.
  CHECK(p_up(n, 0) == doctest::Approx(0.005).epsilon(1e-9));
}

TEST_CASE("shelved ion ignores pulses") {
  auto node = ba_yb_node();
  node.available[0] = false;
  auto n = carrier(node, carrier_pulse(0, 1e5, 5e-6), NoiseConfig::off());
  CHECK(p_up(n, 0) == doctest::Approx(0.0));
  CHECK_FALSE(n.log.empty());
}

TEST_CASE("red sideband on Fock states") {
  const double eta = 0.1, rabi = 1e5;
  const double t_pi = 1.0 / (2.0 * rabi * eta);  // pi for the sqrt(1) coupling
  PulseParams p = carrier_pulse(0, rabi, t_pi);
  p.kind = PulseKind::rsb;
  auto fock = [](int n) {
    Matrix rho = Matrix::Zero(11, 11);
    rho(n, n) = 1.0;
    return qsim::QuantumState(qsim::HilbertSpec({qsim::Subsystem::fock(10)}), rho);
  };
  auto n0 = sideband(make_node({crystal::ba138()}, {fock(0)}), p, eta, NoiseConfig::off());
  CHECK(p_up(n0, 0) == doctest::Approx(0.0));
  auto n1 = sideband(make_node({crystal::ba138()}, {fock(1)}), p, eta, NoiseConfig::off());
  CHECK(p_up(n1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(qsim::mean_occupation(n1.state, 1) == doctest::Approx(0.0).epsilon(1e-12));
  auto n2 = sideband(make_node({crystal::ba138()}, {fock(2)}), p, eta, NoiseConfig::off());
  const double s = std::sin(constants::pi * std::sqrt(2.0) / 2.0);
  CHECK(p_up(n2, 0) == doctest::Approx(s * s).epsilon(1e-12));
}

TEST_CASE("sideband unitaries are block diagonal") {
  const int nmax = 6;
  for (auto kind : {PulseKind::rsb, PulseKind::bsb}) {
    const Matrix u = sideband_unitary(kind, nmax, 1.3e4, 0.4, 2.1e-5);
    CHECK(qsim::is_unitary(u));
    for (int q = 0; q < 2; ++q)
      for (int n = 0; n <= nmax; ++n)
        for (int qp = 0; qp < 2; ++qp)
          for (int np = 0; np <= nmax; ++np) {
            const bool same = q == qp && n == np;
            // rsb: (0, n) <-> (1, n - 1); bsb: (0, n) <-> (1, n + 1)
            const int shift = kind == PulseKind::rsb ? -1 : 1;
            const bool partner = (q == 0 && qp == 1 && np == n + shift) ||
                                 (q == 1 && qp == 0 && np == n - shift);
            if (!same && !partner)
              CHECK(std::abs(u(q * (nmax + 1) + n, qp * (nmax + 1) + np)) < 1e-10);
          }
  }
}

TEST_CASE("MS gate without noise produces the Bell state") {
  const auto params = MSParams::single_loop(100e-6, 0.3);
  CHECK(params.loop_closed());
  auto n = ms_gate(ba_yb_node(0.06), params, NoiseConfig::off());
  const Matrix s = spins(n);
  const Vector target = [&] {
    Vector v = Vector::Zero(4);
    v(0) = 1.0 / std::sqrt(2.0);
    v(3) = -std::exp(Complex(0, -0.3)) / std::sqrt(2.0);
    return v;
  }();
  CHECK((target.adjoint() * s * target)(0, 0).real() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s(0, 0).real() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(s(3, 3).real() == doctest::Approx(0.5).epsilon(1e-6));
  const double initial = motional_purity(ba_yb_node(0.06), 0);
  CHECK(std::abs(motional_purity(n, 0) - initial) < 1e-6);

  // Shifting the force phase by pi flips the sign of the coherence.
  auto m = ms_gate(ba_yb_node(0.06), MSParams::single_loop(100e-6, 0.3 + constants::pi),
                   NoiseConfig::off());
  CHECK((target.adjoint() * spins(m) * target)(0, 0).real() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("spin-motion entanglement peaks mid-gate") {
  const auto params = MSParams::single_loop(100e-6);
  auto purity_at = [&](double frac) {
    // Mid-gate displacements need headroom above the truncation.
    auto n = ba_yb_node(0.0, 25);
    const Matrix u = ms_unitary(params, 25, frac * params.gate_time_s);
    // Top Fock columns are not unitary after truncation but stay unpopulated.
    n.state = qsim::QuantumState(n.state.spec(), u * n.state.rho() * u.adjoint());
    return spin_purity(n, params);
  };
  const double quarter = purity_at(0.25), half = purity_at(0.5), three = purity_at(0.75);
  CHECK(half < quarter);
  CHECK(half < three);
  CHECK(purity_at(1.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("analytic and integrated MS agree without heating") {
  const auto params = MSParams::single_loop(100e-6, 0.2);
  // The closed form uses untruncated matrix elements; n_max 14 puts the
  // truncation error well below the comparison tolerance.
  const auto a = ms_gate_analytic(ba_yb_node(0.06, 14), params);
  NoiseConfig zero = NoiseConfig::off();
  const auto b = ms_gate_integrated(ba_yb_node(0.06, 14), params, zero);
  CHECK(qsim::trace_distance_norm(a.state.rho(), b.state.rho()) < 1e-4);
}

TEST_CASE("MS Bell fidelity falls monotonically with heating") {
  const auto params = MSParams::single_loop(100e-6);
  Vector target = Vector::Zero(4);
  target(0) = 1.0 / std::sqrt(2.0);
  target(3) = -1.0 / std::sqrt(2.0);
  double last = 2.0;
  for (double rate : {0.0, 1.0, 5.0, 10.0}) {
    NoiseConfig noise = NoiseConfig::off();
    noise.heating_rate_per_ms = rate;
    const auto n = ms_gate(ba_yb_node(0.06), params, noise);
    const double f = (target.adjoint() * spins(n) * target)(0, 0).real();
    CAPTURE(rate);
    CHECK(f < last);
    last = f;
  }
}

TEST_CASE("MS swap moves a Ba state onto Yb") {
  const auto params = MSParams::single_loop(100e-6, 0.4);
  // |Ba=0, Yb=1> -> |1, 0>
  auto n = ba_yb_node();
  n.state = qsim::apply_unitary(n.state, qsim::ops::sigma_x(), {1});
  n = ms_swap(n, params, NoiseConfig::off());
  CHECK(spins(n)(2, 2).real() == doctest::Approx(1.0).epsilon(1e-9));
  // |0, 0> stays.
  auto z = ms_swap(ba_yb_node(), params, NoiseConfig::off());
  CHECK(spins(z)(0, 0).real() == doctest::Approx(1.0).epsilon(1e-9));

  // Random Ba states arrive on Yb after the correction.
  Rng rng(42);
  for (int k = 0; k < 10; ++k) {
    Vector psi(2);
    psi << Complex(rng.normal(0, 1), rng.normal(0, 1)), Complex(rng.normal(0, 1), rng.normal(0, 1));
    psi.normalize();
    auto node = ba_yb_node(0.06);
    Matrix prep(2, 2);
    prep << psi(0), -std::conj(psi(1)), psi(1), std::conj(psi(0));
    node.state = qsim::apply_unitary(node.state, prep, {0});
    node = ms_swap(node, params, NoiseConfig::off());
    auto yb = qsim::partial_trace(node.state, {1});
    yb = qsim::apply_unitary(yb, ms_swap_correction(), {0});
    CHECK(qsim::fidelity(yb, psi) >= 1.0 - 1e-6);
  }
}

TEST_CASE("two MS gates with a relative pi phase equal exp(i pi/4 (XX + YY))") {
  const auto params = MSParams::single_loop(100e-6, 0.9);
  auto second = params;
  second.force_phase += constants::pi;
  const int nmax = 10;
  const Matrix u = ms_unitary(second, nmax, second.gate_time_s) *
                   ms_unitary(params, nmax, params.gate_time_s);
  // Restrict to the motional ground state.
  Matrix spin(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) spin(i, j) = u(i * (nmax + 1), j * (nmax + 1));
  const Matrix x = qsim::ops::sigma_x(), y = qsim::ops::sigma_y();
  Matrix xx(4, 4), yy(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          xx(2 * i + k, 2 * j + l) = x(i, j) * x(k, l);
          yy(2 * i + k, 2 * j + l) = y(i, j) * y(k, l);
        }
  const Matrix oracle = (Complex(0, constants::pi / 4) * (xx + yy)).exp();
  // Equal up to a global phase.
  const Complex overlap = (oracle.adjoint() * spin).trace() / 4.0;
  CHECK(std::abs(overlap) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(MSParams::single_loop(0.0), ConfigError);
  PulseParams p;
  p.duration_s = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  NoiseConfig n;
  n.spam_error = 2.0;
  CHECK_THROWS_AS(n.validate(), ConfigError);
}
