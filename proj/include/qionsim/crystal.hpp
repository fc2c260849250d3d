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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qionsim::crystal {

struct Species {
  std::string name;
  double mass_amu = 0.0;
  int charge = 1;

  // Throws ConfigError unless mass > 0 and charge >= 1.
  void validate() const;
  friend bool operator==(const Species&, const Species&) = default;
};

Species yb171();
Species ba138();
// Looks up a built-in species by name ("Yb171", "Ba138").
std::optional<Species> species_by_name(const std::string& name);

enum class Direction { x, y, z };
std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

// Secular frequencies are quoted for the reference species, in ordinary Hz.
//
// Other species see the axial (electrostatic) spring scaled by charge, and the
// radial spring as an rf pseudopotential (scaling as q^2/m) minus the static
// defocusing from the axial field.
struct TrapConfig {
  double axial_freq_hz = 0.5e6;
  double transverse_freq_x_hz = 1.5e6;
  double transverse_freq_y_hz = 1.6e6;
  Species reference_species = yb171();

  // Throws on non-positive frequencies; returns human-readable warnings for
  // configurations that are legal but suspicious.
  std::vector<std::string> validate() const;
};

struct IonChain {
  std::vector<Species> ions;

  std::size_t size() const { return ions.size(); }
  void validate() const;
};

struct Mode {
  double frequency_hz = 0.0;
  // Orthonormal eigenvector of the mass-weighted Hessian, one entry per ion.
  // Largest-magnitude component is positive (first one wins on ties).
  std::vector<double> eigenvector;
  std::string label;
};

struct ModeSet {
  Direction direction = Direction::z;
  std::vector<Mode> modes;  // ascending frequency
  std::vector<double> masses_amu;

  std::size_t size() const { return modes.size(); }
  const Mode& by_label(const std::string& label) const;
};

// Sorted axial equilibrium positions in meters. Newton iteration on the
// dimensionless potential, gradient tolerance 1e-12.
std::vector<double> equilibrium_positions(const IonChain& chain,
                                          const TrapConfig& trap);

// Spring constant of ion `ion` along `d` divided by the reference axial spring
// constant m_ref * omega_z^2.
double relative_spring(const Species& ion, const TrapConfig& trap, Direction d);

// Mass-weighted Hessian M^{-1/2} K M^{-1/2} in units of omega_z(ref)^2, with
// masses in units of the reference mass. Eigenvalues are (omega/omega_z)^2.
Eigen::MatrixXd mass_weighted_hessian(const IonChain& chain,
                                      const TrapConfig& trap, Direction d);

ModeSet normal_modes(const IonChain& chain, const TrapConfig& trap,
                     Direction d);

// eta = |b_i| * delta_k * sqrt(hbar / (2 m_i omega)).
double lamb_dicke(const ModeSet& modes, std::size_t mode_index,
                  std::size_t ion_index, double delta_k);

// Wavevector difference for two beams of the same wavelength crossing at
// `angle_rad` (pi for counter-propagating).
double delta_k_for_beams(double wavelength_m, double angle_rad);

// 1 - min|b| / max|b| per mode.
std::vector<double> mode_mismatch(const ModeSet& modes);

}  // namespace qionsim::crystal
