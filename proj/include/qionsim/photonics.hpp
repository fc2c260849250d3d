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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qionsim/common.hpp"
#include "qionsim/detection.hpp"
#include "qionsim/qsim.hpp"

namespace qionsim::photonics {

// Photon polarization is a qubit with H = level 0 and V = level 1. An
// atom-photon pair is ordered [atom, photon]; the ideal pair is
// (|down,H> + |up,V>) / sqrt(2).
inline constexpr int kH = 0;
inline constexpr int kV = 1;

struct PhotonCollectionConfig {
  double excitation_prob = 0.10;
  double solid_angle_fraction = 0.10;
  double detector_efficiency = 0.80;
  // Fraction of decays into the two collected channels; the pair itself is
  // always balanced.
  double decay_branching = 1.0;
  // Photon depolarizing probability standing in for the high-NA
  // polarization mixing.
  double polarization_mixing_error = 0.12;
  // Probability of full atom dephasing from a second, undetected scatter.
  double double_excitation_error = 0.025;
  // Atom bit-flip probability (preparation and readout).
  double spam_error = 0.01;

  void validate() const;
  double success_probability() const;
  // Same efficiencies with every error knob set to zero.
  PhotonCollectionConfig without_errors() const;
};

qsim::HilbertSpec pair_spec();
qsim::Vector ideal_pair();

// Heralded atom-photon state after the configured error channels.
qsim::QuantumState heralded_state(const PhotonCollectionConfig& config);

struct HeraldedPair {
  std::optional<qsim::QuantumState> state;  // set only when heralded
  std::uint64_t attempts = 0;
  bool herald = false;
};

// A single excitation attempt.
HeraldedPair attempt_entanglement(const PhotonCollectionConfig& config, Rng& rng);

// Repeats attempts until a herald or `max_attempts` (geometric sampling).
HeraldedPair entangle_until_herald(const PhotonCollectionConfig& config,
                                   Rng& rng,
                                   std::uint64_t max_attempts = UINT64_MAX);

// Half-wave plate Jones matrix [[cos 2t, sin 2t], [sin 2t, -cos 2t]], so
// H -> cos2t H + sin2t V and V -> sin2t H - cos2t V.
qsim::Matrix hwp_matrix(double angle);
double reduce_hwp_angle(double angle);  // into [0, pi)

qsim::QuantumState hwp(const qsim::QuantumState& state, std::size_t photon,
                       double angle);

struct PbsOutcome {
  int outcome = kH;
  double probability = 0.0;
  qsim::QuantumState rest;  // remaining subsystems, renormalized
};

// H/V projective measurement of `photon`; the photon is traced out.
PbsOutcome pbs_measure(const qsim::QuantumState& state, std::size_t photon,
                       Rng& rng);

// Atom analysis: HWP on the photon, then an optional carrier pi/2 pulse on
// the atom with the given phase before a z readout. Phase pi/2 maps
// (down + up)/sqrt(2) to up.
struct AnalysisBasis {
  std::string name;
  double hwp_angle = 0.0;
  std::optional<double> pulse_phase;
};

// z basis (HWP 0, no pulse) and the rotated basis (HWP pi/8, pulse pi/2).
std::vector<AnalysisBasis> standard_bases();

struct ConditionalProbabilities {
  double p_h = 0.0;             // photon outcome probability
  double p_up_given_h = 0.0;
  double p_up_given_v = 0.0;
};

// Exact outcome statistics of a pair in one analysis basis.
ConditionalProbabilities analyze(const qsim::QuantumState& pair,
                                 const AnalysisBasis& basis);

struct CorrelationRow {
  AnalysisBasis basis;
  std::uint64_t heralds_h = 0;
  std::uint64_t heralds_v = 0;
  detection::PopulationEstimate up_given_h;
  detection::PopulationEstimate up_given_v;
};

struct CorrelationTable {
  std::vector<CorrelationRow> rows;
  std::uint64_t attempts = 0;
  std::uint64_t heralds = 0;
};

// `heralds_per_basis` heralded repetitions per basis; the atom is read out
// with alternating Ba detection, alternating within each photon bucket.
// Throws NoDataError if a bucket collects no readout photons.
CorrelationTable correlation_experiment(
    const PhotonCollectionConfig& config,
    const std::vector<AnalysisBasis>& bases, std::uint64_t heralds_per_basis,
    const detection::BaDetectionConfig& readout, Rng& rng);

// Two-basis lower bound on the fidelity with the ideal pair:
// F >= (P(dH) + P(uV))/2 + E_x/2 - sqrt(P(dV) P(uH)),
// E_x the correlation in the rotated basis.
double fidelity_bound(const ConditionalProbabilities& z,
                      const ConditionalProbabilities& x);
// Same, from a table holding rows named "z" and "x".
double fidelity_bound(const CorrelationTable& table);
// Same, evaluated exactly on a density matrix.
double fidelity_bound(const qsim::QuantumState& pair);

enum class BsaOutcome { psi_plus, psi_minus, none };

struct BsaResult {
  BsaOutcome outcome = BsaOutcome::none;
  double probability = 0.0;
  std::optional<qsim::QuantumState> atoms;  // [atom_a, atom_b] when heralded
};

struct BsaDistribution {
  double p_psi_plus = 0.0;
  double p_psi_minus = 0.0;
  double p_none = 0.0;
  qsim::QuantumState atoms_psi_plus;
  qsim::QuantumState atoms_psi_minus;
  qsim::QuantumState atoms_none;
};

// Linear-optics analyzer on the two photons. Visibility V mixes the
// interference projectors with the distinguishable-photon coincidence
// pattern; the herald probability does not depend on V.
BsaDistribution bell_state_analyzer(const qsim::QuantumState& pair_a,
                                    const qsim::QuantumState& pair_b,
                                    double visibility = 1.0);

BsaResult bell_state_analyzer(const HeraldedPair& pair_a,
                              const HeraldedPair& pair_b, Rng& rng,
                              double visibility = 1.0);

// Atom-atom Bell targets (|01> +- |10>)/sqrt(2).
qsim::Vector psi_plus();
qsim::Vector psi_minus();

}  // namespace qionsim::photonics
