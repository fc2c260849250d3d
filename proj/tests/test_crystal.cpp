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

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "qionsim/common.hpp"
#include "qionsim/crystal.hpp"

using namespace qionsim;
using namespace qionsim::crystal;

namespace {

IonChain ba_yb() { return {{ba138(), yb171()}}; }
IonChain yb_yb() { return {{yb171(), yb171()}}; }

double ell(const TrapConfig& trap) {
  const double m = trap.reference_species.mass_amu * constants::amu;
  const double w = constants::two_pi * trap.axial_freq_hz;
  return std::cbrt(constants::elementary_charge * constants::elementary_charge /
                   (4.0 * constants::pi * constants::epsilon0 * m * w * w));
}

// Potential energy in units of m_ref w_z^2 l^2 for positions in units of l:
// sum_i k_i/2 x_i^2 + sum_{i<j} 1 / |x_i - x_j| (unit charges).
double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e += 0.5 * x[i] * x[i];
    for (std::size_t j = i + 1; j < x.size(); ++j) e += 1.0 / std::abs(x[i] - x[j]);
  }
  return e;
}

// Brute force: scan the separation of a symmetric pair, then refine by
// golden-section search.
double brute_force_half_spacing() {
  double best = 0.1, best_e = 1e300;
  for (int i = 1; i < 4000; ++i) {
    const double h = 1e-3 * i;
    const double e = energy({-h, h});
    if (e < best_e) best_e = e, best = h;
  }
  double a = best - 1e-3, b = best + 1e-3;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (energy({-c, c}) < energy({-d, d})) b = d; else a = c;
  }
  return 0.5 * (a + b);
}

// Finite-difference Hessian of the full potential along one direction, with
// per-ion springs k_i (units of m_ref w_z^2), mass weighted.
Eigen::MatrixXd fd_mass_weighted_hessian(const std::vector<double>& z_eq,
                                         const std::vector<double>& springs,
                                         const std::vector<double>& masses, bool axial) {
  const std::size_t n = z_eq.size();
  auto pot = [&](const std::vector<double>& u) {
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e += 0.5 * springs[i] * u[i] * u[i];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dz = (z_eq[i] + (axial ? u[i] : 0.0)) - (z_eq[j] + (axial ? u[j] : 0.0));
        const double dr = axial ? 0.0 : u[i] - u[j];
        e += 1.0 / std::sqrt(dz * dz + dr * dr);
      }
    return e;
  };
  const double h = 1e-4;
  Eigen::MatrixXd hess(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      auto f = [&](double si, double sj) {
        // Displacements from equilibrium (the axis, transversally).
        std::vector<double> u(n, 0.0);
        u[i] += si;
        u[j] += sj;
        return pot(u);
      };
      hess(i, j) = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) hess(i, j) /= std::sqrt(masses[i] * masses[j]);
  return hess;
}

std::vector<double> scaled_positions(const IonChain& chain, const TrapConfig& trap) {
  auto z = equilibrium_positions(chain, trap);
  for (double& v : z) v /= ell(trap);
  return z;
}

}  // namespace

TEST_CASE("single ion sits at the trap center") {
  const auto z = equilibrium_positions({{yb171()}}, TrapConfig{});
  REQUIRE(z.size() == 1);
  CHECK(z[0] == doctest::Approx(0.0));
}

TEST_CASE("two equal-mass ions match closed form and brute-force minimization") {
  TrapConfig trap;
  const auto z = equilibrium_positions(yb_yb(), trap);
  const double m = trap.reference_species.mass_amu * constants::amu;
  const double w = constants::two_pi * trap.axial_freq_hz;
  const double e2 = constants::elementary_charge * constants::elementary_charge;
  const double closed = 0.5 * std::cbrt(e2 / (2.0 * constants::pi * constants::epsilon0 * m * w * w));
  CHECK(z[1] == doctest::Approx(closed).scale(0).epsilon(1e-10));
  CHECK(z[0] == doctest::Approx(-closed).scale(0).epsilon(1e-10));
  CHECK(z[1] / ell(trap) == doctest::Approx(brute_force_half_spacing()).scale(0).epsilon(1e-6));
}

TEST_CASE("equal-charge equilibrium does not depend on the masses") {
  TrapConfig trap;
  const auto a = equilibrium_positions(yb_yb(), trap);
  const auto b = equilibrium_positions(ba_yb(), trap);
  for (std::size_t i = 0; i < 2; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
}

TEST_CASE("three equal ions reproduce the textbook spacing and frequencies") {
  TrapConfig trap;
  IonChain chain{{yb171(), yb171(), yb171()}};
  const auto z = scaled_positions(chain, trap);
  CHECK(z[2] == doctest::Approx(std::cbrt(5.0 / 4.0)).epsilon(1e-10));
  CHECK(z[1] == doctest::Approx(0.0).epsilon(1e-10));
  const auto modes = normal_modes(chain, trap, Direction::z);
  const double wz = trap.axial_freq_hz;
  CHECK(modes.modes[0].frequency_hz / wz == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(modes.modes[1].frequency_hz / wz == doctest::Approx(std::sqrt(3.0)).epsilon(1e-9));
  CHECK(modes.modes[2].frequency_hz / wz == doctest::Approx(std::sqrt(29.0 / 5.0)).epsilon(1e-9));
}

TEST_CASE("two equal ions: axial modes at w_z and sqrt3 w_z") {
  TrapConfig trap;
  const auto modes = normal_modes(yb_yb(), trap, Direction::z);
  REQUIRE(modes.size() == 2);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(modes.modes[0].frequency_hz == doctest::Approx(trap.axial_freq_hz).epsilon(1e-9));
  CHECK(modes.modes[1].frequency_hz ==
        doctest::Approx(std::sqrt(3.0) * trap.axial_freq_hz).epsilon(1e-9));
  CHECK(modes.modes[0].eigenvector[0] == doctest::Approx(r).epsilon(1e-9));
  CHECK(modes.modes[0].eigenvector[1] == doctest::Approx(r).epsilon(1e-9));
  CHECK(std::abs(modes.modes[1].eigenvector[0]) == doctest::Approx(r).epsilon(1e-9));
  CHECK(modes.modes[1].eigenvector[0] * modes.modes[1].eigenvector[1] ==
        doctest::Approx(-0.5).epsilon(1e-9));
  for (double mm : mode_mismatch(modes)) CHECK(mm == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("Ba-Yb modes agree with a finite-difference Hessian oracle") {
  TrapConfig trap;
  const auto chain = ba_yb();
  const auto z = scaled_positions(chain, trap);
  const double mref = trap.reference_species.mass_amu;
  const std::vector<double> masses{ba138().mass_amu / mref, yb171().mass_amu / mref};
  for (auto d : {Direction::z, Direction::x, Direction::y}) {
    CAPTURE(to_string(d));
    std::vector<double> springs;
    for (const auto& s : chain.ions) {
      // Independent radial spring: pseudopotential (q^2/m) minus half the
      // axial curvature, referenced to the quoted reference-species frequency.
      if (d == Direction::z) {
        springs.push_back(1.0);
      } else {
        const double wr = d == Direction::x ? trap.transverse_freq_x_hz : trap.transverse_freq_y_hz;
        const double wz = trap.axial_freq_hz;
        springs.push_back((wr * wr + 0.5 * wz * wz) / (wz * wz) * (mref / s.mass_amu) - 0.5);
      }
    }
    // The Coulomb term enters with opposite curvature transversally, which the
    // finite difference of the full 1/r potential captures.
    const auto oracle = fd_mass_weighted_hessian(z, springs, masses, d == Direction::z);
    const auto lib = mass_weighted_hessian(chain, trap, d);
    CHECK((lib - oracle).norm() / oracle.norm() < 1e-6);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle);
    const auto modes = normal_modes(chain, trap, d);
    for (int k = 0; k < 2; ++k) {
      const double f = std::sqrt(es.eigenvalues()(k)) * trap.axial_freq_hz;
      CHECK(modes.modes[k].frequency_hz == doctest::Approx(f).epsilon(1e-6));
      const double overlap = std::abs(es.eigenvectors()(0, k) * modes.modes[k].eigenvector[0] +
                                      es.eigenvectors()(1, k) * modes.modes[k].eigenvector[1]);
      CHECK(overlap == doctest::Approx(1.0).epsilon(1e-8));
    }
    // Reconstruction from eigenpairs.
    Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(2, 2);
    for (const auto& m : modes.modes) {
      Eigen::Vector2d v(m.eigenvector[0], m.eigenvector[1]);
      CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-10));
      const double lam = std::pow(m.frequency_hz / trap.axial_freq_hz, 2);
      rebuilt += lam * v * v.transpose();
    }
    CHECK((rebuilt - lib).norm() / lib.norm() < 1e-8);
  }
}

TEST_CASE("Ba-Yb default config golden mode table") {
  // Recorded at axial 0.5 MHz, transverse 1.5 / 1.6 MHz, reference Yb171.
  TrapConfig trap;
  const auto ax = normal_modes(ba_yb(), trap, Direction::z);
  CHECK(ax.by_label("IP").frequency_hz == doctest::Approx(524573.4758583545).epsilon(1e-9));
  CHECK(ax.by_label("OP").frequency_hz == doctest::Approx(919011.816260466).epsilon(1e-9));
  CHECK(ax.by_label("OP").eigenvector[0] == doctest::Approx(0.7779218333678652).epsilon(1e-9));
  const auto tx = normal_modes(ba_yb(), trap, Direction::x);
  CHECK(tx.modes[0].frequency_hz == doctest::Approx(1452326.4230948966).epsilon(1e-9));
  CHECK(tx.modes[1].frequency_hz == doctest::Approx(1831622.7427496563).epsilon(1e-9));
}

TEST_CASE("Ba-Yb transverse mode of the lighter ion carries most weight on Ba") {
  TrapConfig trap;
  for (auto d : {Direction::x, Direction::y}) {
    const auto modes = normal_modes(ba_yb(), trap, d);
    // The higher transverse mode belongs to Ba (larger radial spring).
    const auto& m = modes.modes[1];
    CHECK(m.eigenvector[0] * m.eigenvector[0] > 0.7);
  }
}

TEST_CASE("transverse mismatch exceeds axial mismatch for Ba-Yb") {
  TrapConfig trap;
  const auto ax = mode_mismatch(normal_modes(ba_yb(), trap, Direction::z));
  const auto tx = mode_mismatch(normal_modes(ba_yb(), trap, Direction::x));
  CHECK(*std::min_element(tx.begin(), tx.end()) > *std::max_element(ax.begin(), ax.end()));
  CHECK(mode_mismatch(normal_modes({{ba138()}}, trap, Direction::z))[0] == 0.0);
}

TEST_CASE("axial modes are invariant under swapping ion order") {
  TrapConfig trap;
  const auto a = normal_modes(ba_yb(), trap, Direction::z);
  const auto b = normal_modes({{yb171(), ba138()}}, trap, Direction::z);
  for (int k = 0; k < 2; ++k) {
    CHECK(a.modes[k].frequency_hz == doctest::Approx(b.modes[k].frequency_hz).epsilon(1e-12));
    CHECK(std::abs(a.modes[k].eigenvector[0]) ==
          doctest::Approx(std::abs(b.modes[k].eigenvector[1])).epsilon(1e-10));
  }
}

TEST_CASE("Lamb-Dicke parameter") {
  TrapConfig trap;
  const auto modes = normal_modes(ba_yb(), trap, Direction::z);
  CHECK(lamb_dicke(modes, 1, 0, 0.0) == 0.0);

  // Independent evaluation for counter-propagating 532 nm beams on Ba, OP mode.
  const double dk = 2.0 * constants::two_pi / 532e-9;
  const auto& op = modes.modes[1];
  const double expected = std::abs(op.eigenvector[0]) * dk *
                          std::sqrt(constants::hbar / (2.0 * ba138().mass_amu * constants::amu *
                                                       constants::two_pi * op.frequency_hz));
  CHECK(delta_k_for_beams(532e-9, constants::pi) == doctest::Approx(dk).epsilon(1e-12));
  CHECK(lamb_dicke(modes, 1, 0, dk) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(lamb_dicke(modes, 1, 0, dk) == doctest::Approx(0.1161).scale(0).epsilon(1e-3));

  // Doubling every frequency scales eta by 1/sqrt2.
  TrapConfig doubled = trap;
  doubled.axial_freq_hz *= 2;
  doubled.transverse_freq_x_hz *= 2;
  doubled.transverse_freq_y_hz *= 2;
  const auto m2 = normal_modes(ba_yb(), doubled, Direction::z);
  CHECK(lamb_dicke(m2, 1, 0, dk) == doctest::Approx(expected / std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("invalid inputs are rejected") {
  TrapConfig bad;
  bad.axial_freq_hz = -1;
  CHECK_THROWS_AS(equilibrium_positions(yb_yb(), bad), ConfigError);
  CHECK_THROWS_AS(normal_modes({{}}, TrapConfig{}, Direction::z), ConfigError);
  CHECK_THROWS_AS(direction_from_string("w"), ConfigError);
  CHECK_FALSE(species_by_name("Ca40").has_value());
}
