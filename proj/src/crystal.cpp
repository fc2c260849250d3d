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

#include "qionsim/crystal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qionsim/common.hpp"

namespace qionsim::crystal {

void Species::validate() const {
  if (!(mass_amu > 0.0))
    throw ConfigError("species '" + name + "': mass must be positive");
  if (charge < 1)
    throw ConfigError("species '" + name + "': charge must be >= 1");
}

Species yb171() { return {"Yb171", 170.9363258, 1}; }
Species ba138() { return {"Ba138", 137.9052472, 1}; }

std::optional<Species> species_by_name(const std::string& name) {
  if (name == "Yb171") return yb171();
  if (name == "Ba138") return ba138();
  return std::nullopt;
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::x: return "x";
    case Direction::y: return "y";
    case Direction::z: return "z";
  }
  return "?";
}

Direction direction_from_string(const std::string& s) {
  if (s == "x") return Direction::x;
  if (s == "y") return Direction::y;
  if (s == "z") return Direction::z;
  throw ConfigError("unknown direction '" + s + "' (expected x, y or z)");
}

std::vector<std::string> TrapConfig::validate() const {
  reference_species.validate();
  if (!(axial_freq_hz > 0.0) || !(transverse_freq_x_hz > 0.0) ||
      !(transverse_freq_y_hz > 0.0))
    throw ConfigError("trap frequencies must be positive");
  std::vector<std::string> warnings;
  if (transverse_freq_x_hz <= axial_freq_hz ||
      transverse_freq_y_hz <= axial_freq_hz)
    warnings.emplace_back(
        "transverse frequency not above axial; linear chain may be unstable");
  return warnings;
}

void IonChain::validate() const {
  if (ions.empty()) throw ConfigError("ion chain must contain at least one ion");
  for (const auto& s : ions) s.validate();
}

const Mode& ModeSet::by_label(const std::string& label) const {
  for (const auto& m : modes)
    if (m.label == label) return m;
  throw ConfigError("no mode labelled '" + label + "' in direction " +
                    to_string(direction));
}

double relative_spring(const Species& ion, const TrapConfig& trap,
                       Direction d) {
  const double q = static_cast<double>(ion.charge) /
                   static_cast<double>(trap.reference_species.charge);
  if (d == Direction::z) return q;
  const double wr = d == Direction::x ? trap.transverse_freq_x_hz
                                      : trap.transverse_freq_y_hz;
  const double wz = trap.axial_freq_hz;
  const double pseudo = (wr * wr + 0.5 * wz * wz) / (wz * wz);
  const double mass_ratio = trap.reference_species.mass_amu / ion.mass_amu;
  return q * q * mass_ratio * pseudo - 0.5 * q;
}

namespace {

// Length unit l with l^3 = e^2 / (4 pi eps0 m_ref omega_z^2).
double length_scale(const TrapConfig& trap) {
  const double m = trap.reference_species.mass_amu * constants::amu;
  const double w = constants::two_pi * trap.axial_freq_hz;
  const double k = m * w * w;
  const double c = constants::elementary_charge * constants::elementary_charge /
                   (4.0 * constants::pi * constants::epsilon0 * k);
  return std::cbrt(c);
}

struct ScaledChain {
  Eigen::VectorXd kappa;   // axial spring per ion
  Eigen::VectorXd charge;  // relative to reference
};

ScaledChain scale(const IonChain& chain, const TrapConfig& trap) {
  const std::size_t n = chain.size();
  ScaledChain s{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (std::size_t i = 0; i < n; ++i) {
    s.kappa[i] = relative_spring(chain.ions[i], trap, Direction::z);
    s.charge[i] = static_cast<double>(chain.ions[i].charge);
  }
  return s;
}

double energy(const ScaledChain& s, const Eigen::VectorXd& u) {
  double e = 0.0;
  const auto n = u.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    e += 0.5 * s.kappa[i] * u[i] * u[i];
    for (Eigen::Index j = i + 1; j < n; ++j)
      e += s.charge[i] * s.charge[j] / std::abs(u[i] - u[j]);
  }
  return e;
}

Eigen::VectorXd gradient(const ScaledChain& s, const Eigen::VectorXd& u) {
  const auto n = u.size();
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double gi = s.kappa[i] * u[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = u[i] - u[j];
      gi -= s.charge[i] * s.charge[j] * (d > 0 ? 1.0 : -1.0) / (d * d);
    }
    g[i] = gi;
  }
  return g;
}

// Second derivatives of the Coulomb term: c_ij = q_i q_j / |u_i - u_j|^3.
Eigen::MatrixXd coupling(const ScaledChain& s, const Eigen::VectorXd& u) {
  const auto n = u.size();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) {
        const double d = std::abs(u[i] - u[j]);
        c(i, j) = s.charge[i] * s.charge[j] / (d * d * d);
      }
  return c;
}

Eigen::MatrixXd axial_hessian(const ScaledChain& s, const Eigen::VectorXd& u) {
  const Eigen::MatrixXd c = coupling(s, u);
  Eigen::MatrixXd h = -2.0 * c;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    h(i, i) = s.kappa[i] + 2.0 * c.row(i).sum();
  return h;
}

bool sorted_strictly(const Eigen::VectorXd& u) {
  for (Eigen::Index i = 1; i < u.size(); ++i)
    if (!(u[i] > u[i - 1])) return false;
  return true;
}

Eigen::VectorXd scaled_equilibrium(const ScaledChain& s) {
  const auto n = s.kappa.size();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(s.kappa[i] > 0.0))
      throw UnstableError("axial confinement is not positive for every ion");
  Eigen::VectorXd u(n);
  const double spacing = 2.018 / std::pow(static_cast<double>(n), 0.559);
  for (Eigen::Index i = 0; i < n; ++i)
    u[i] = (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) * spacing;
  if (n == 1) u[0] = 0.0;

  constexpr double tol = 1e-12;
  constexpr int max_iter = 200;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd g = gradient(s, u);
    if (g.lpNorm<Eigen::Infinity>() < tol) return u;
    const Eigen::MatrixXd h = axial_hessian(s, u);
    Eigen::VectorXd step = h.ldlt().solve(-g);
    // Backtrack until the ordering survives and energy does not increase.
    const double e0 = energy(s, u);
    double alpha = 1.0;
    Eigen::VectorXd trial = u + step;
    while (alpha > 1e-12 &&
           (!sorted_strictly(trial) || energy(s, trial) > e0 + 1e-14)) {
      alpha *= 0.5;
      trial = u + alpha * step;
    }
    if (alpha <= 1e-12) {
      // Near the minimum energy differences hit round-off; accept a full
      // Newton step if it keeps the order and shrinks the gradient.
      trial = u + step;
      if (!sorted_strictly(trial) ||
          gradient(s, trial).lpNorm<Eigen::Infinity>() >=
              g.lpNorm<Eigen::Infinity>())
        throw ConvergenceError("equilibrium line search stalled");
    }
    u = trial;
  }
  if (gradient(s, u).lpNorm<Eigen::Infinity>() < tol) return u;
  throw ConvergenceError("equilibrium minimizer did not converge");
}

std::string label_for(const Eigen::VectorXd& v, Eigen::Index index) {
  bool same_sign = true;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] * v[0] < 0.0) same_sign = false;
  if (v.size() <= 2) return same_sign ? "IP" : "OP";
  if (same_sign) return "IP";
  return "M" + std::to_string(index);
}

}  // namespace

std::vector<double> equilibrium_positions(const IonChain& chain,
                                          const TrapConfig& trap) {
  chain.validate();
  trap.validate();
  const Eigen::VectorXd u = scaled_equilibrium(scale(chain, trap));
  const double l = length_scale(trap);
  std::vector<double> out(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i)
    out[static_cast<std::size_t>(i)] = u[i] * l;
  return out;
}

Eigen::MatrixXd mass_weighted_hessian(const IonChain& chain,
                                      const TrapConfig& trap, Direction d) {
  chain.validate();
  trap.validate();
  const ScaledChain s = scale(chain, trap);
  const Eigen::VectorXd u = scaled_equilibrium(s);
  const auto n = u.size();
  Eigen::MatrixXd k;
  if (d == Direction::z) {
    k = axial_hessian(s, u);
  } else {
    const Eigen::MatrixXd c = coupling(s, u);
    k = c;
    for (Eigen::Index i = 0; i < n; ++i)
      k(i, i) = relative_spring(chain.ions[static_cast<std::size_t>(i)], trap, d) -
                c.row(i).sum();
  }
  Eigen::VectorXd inv_sqrt_mu(n);
  for (Eigen::Index i = 0; i < n; ++i)
    inv_sqrt_mu[i] = 1.0 / std::sqrt(chain.ions[static_cast<std::size_t>(i)].mass_amu /
                                      trap.reference_species.mass_amu);
  return inv_sqrt_mu.asDiagonal() * k * inv_sqrt_mu.asDiagonal();
}

ModeSet normal_modes(const IonChain& chain, const TrapConfig& trap,
                     Direction d) {
  const Eigen::MatrixXd h = mass_weighted_hessian(chain, trap, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("mode eigen-solve failed");

  ModeSet out;
  out.direction = d;
  for (const auto& ion : chain.ions) out.masses_amu.push_back(ion.mass_amu);
  const auto n = h.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lambda = solver.eigenvalues()[k];
    if (!(lambda > 0.0)) {
      std::ostringstream msg;
      msg << "unstable normal mode in direction " << to_string(d)
          << " (eigenvalue " << lambda << ")";
      throw UnstableError(msg.str());
    }
    Eigen::VectorXd v = solver.eigenvectors().col(k);
    Eigen::Index lead = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(v[i]) > std::abs(v[lead]) + 1e-12) lead = i;
    if (v[lead] < 0.0) v = -v;

    Mode m;
    m.frequency_hz = trap.axial_freq_hz * std::sqrt(lambda);
    m.eigenvector.assign(v.data(), v.data() + n);
    m.label = label_for(v, k);
    out.modes.push_back(std::move(m));
  }
  return out;
}

double lamb_dicke(const ModeSet& modes, std::size_t mode_index,
                  std::size_t ion_index, double delta_k) {
  if (mode_index >= modes.modes.size())
    throw ConfigError("mode index out of range");
  const Mode& m = modes.modes[mode_index];
  if (ion_index >= m.eigenvector.size())
    throw ConfigError("ion index out of range");
  if (!(m.frequency_hz > 0.0))
    throw ConfigError("mode frequency must be positive");
  const double mass = modes.masses_amu.at(ion_index) * constants::amu;
  const double omega = constants::two_pi * m.frequency_hz;
  return std::abs(m.eigenvector[ion_index]) * std::abs(delta_k) *
         std::sqrt(constants::hbar / (2.0 * mass * omega));
}

double delta_k_for_beams(double wavelength_m, double angle_rad) {
  if (!(wavelength_m > 0.0)) throw ConfigError("wavelength must be positive");
  const double k = constants::two_pi / wavelength_m;
  return 2.0 * k * std::sin(0.5 * angle_rad);
}

std::vector<double> mode_mismatch(const ModeSet& modes) {
  std::vector<double> out;
  out.reserve(modes.modes.size());
  for (const auto& m : modes.modes) {
    double lo = std::abs(m.eigenvector.at(0));
    double hi = lo;
    for (double b : m.eigenvector) {
      lo = std::min(lo, std::abs(b));
      hi = std::max(hi, std::abs(b));
    }
    out.push_back(hi > 0.0 ? 1.0 - lo / hi : 0.0);
  }
  return out;
}

}  // namespace qionsim::crystal
