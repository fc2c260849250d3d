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

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "qionsim/crystal.hpp"
#include "qionsim/qsim.hpp"

namespace qionsim::gates {

// Joint state of one trap: a qubit subsystem per ion, in chain order, followed
// by the retained motional modes. Qubit level 0 is the dark/initial state
// (|down> for Ba, |Down> for Yb), level 1 the bright one.
struct NodeState {
  qsim::QuantumState state;
  std::vector<crystal::Species> ions;
  std::vector<bool> available;   // false while an ion is shelved
  std::vector<std::string> log;  // warnings and skipped operations

  std::size_t qubit(std::size_t ion) const { return ion; }
  std::size_t mode(std::size_t k) const { return ions.size() + k; }
  std::size_t n_modes() const { return state.spec().size() - ions.size(); }
};

// Qubits in level 0 tensored with the given single-mode states.
NodeState make_node(std::vector<crystal::Species> ions,
                    const std::vector<qsim::QuantumState>& modes);

enum class PulseKind { carrier, rsb, bsb };

struct PulseParams {
  std::size_t target = 0;   // ion index
  PulseKind kind = PulseKind::carrier;
  double rabi_freq_hz = 0;  // carrier Rabi frequency Omega / 2pi
  double phase = 0;         // rotation axis angle in the xy plane
  double duration_s = 0;
  std::size_t mode = 0;     // mode slot, sidebands only

  void validate() const;
};

enum class CrosstalkMode { off, raw, suppressed };

struct CrosstalkConfig {
  double ratio_532_on_yb = 0.026;
  double ratio_355_on_ba = 0.11;
  double suppressed_ratio = 0.01;
  CrosstalkMode mode = CrosstalkMode::suppressed;

  void validate() const;
  // Rabi-frequency ratio felt by `other` when a beam addresses `target`.
  double ratio(const crystal::Species& target,
               const crystal::Species& other) const;
};

struct NoiseConfig {
  double heating_rate_per_ms = 5.0;
  double spam_error = 0.01;
  double scatter_per_rabi_cycle = 1e-5;
  CrosstalkConfig crosstalk;

  static NoiseConfig off();
  void validate() const;
};

// Probability of a spontaneous Raman scattering event during `pulse`.
double scatter_probability(const PulseParams& pulse, const NoiseConfig& noise);

// Rotation by theta = 2 pi Omega T about the axis at angle `phase`. With noise:
// crosstalk rotates other-species ions by the scaled angle and scattering
// depolarizes the target with the per-cycle probability.
NodeState carrier(NodeState node, const PulseParams& pulse,
                  const NoiseConfig& noise);

// Exact n-dependent sideband rotation on the truncated mode. rsb couples
// |0,n> <-> |1,n-1> at Omega eta sqrt(n); bsb couples |0,n> <-> |1,n+1> at
// Omega eta sqrt(n+1). Heating on the addressed mode is integrated alongside
// when the noise rate is non-zero.
NodeState sideband(NodeState node, const PulseParams& pulse, double eta,
                   const NoiseConfig& noise);

// Unitary on (qubit, mode) for a sideband pulse with the given sideband Rabi
// frequency (Omega * eta, Hz).
qsim::Matrix sideband_unitary(PulseKind kind, int n_max,
                              double sideband_rabi_hz, double phase,
                              double duration_s);

struct MSParams {
  double detuning_hz = 10e3;             // symmetric sideband detuning delta/2pi
  double gate_time_s = 100e-6;
  std::array<double, 2> sideband_rabi_hz{5e3, 5e3};  // eta_j Omega_j / 2pi
  double force_phase = 0.0;              // phi_S
  std::size_t mode = 0;
  std::array<std::size_t, 2> ions{0, 1};

  // Single phase-space loop with a maximally entangling spin phase.
  static MSParams single_loop(double gate_time_s, double force_phase = 0.0,
                              std::size_t mode = 0);
  bool loop_closed(double tol = 1e-9) const;
  void validate() const;
  // Spin-operator phase applied to each ion so that |00> maps to
  // (|00> - e^{-i phi_S}|11>)/sqrt2.
  double spin_phase() const;
};

// Closed-form Lamb-Dicke MS propagator on (ion0, ion1, mode) at time t:
// branch-wise displacement with matrix elements of the infinite-space
// displacement operator, plus the geometric phase.
qsim::Matrix ms_unitary(const MSParams& params, int n_max, double t);

// Analytic path; ignores heating.
NodeState ms_gate_analytic(NodeState node, const MSParams& params);
// Time-stepped interaction-picture Hamiltonian plus heating Lindbladian on the
// gate mode.
NodeState ms_gate_integrated(NodeState node, const MSParams& params,
                             const NoiseConfig& noise,
                             const qsim::IntegratorOptions& options = {});
// Analytic when the heating rate is zero, integrated otherwise.
NodeState ms_gate(NodeState node, const MSParams& params,
                  const NoiseConfig& noise);

// Two MS gates whose force phases differ by pi. Together they implement
// exp(i pi/4 (XX + YY)) on the two qubits:
//   |00> -> |00>, |01> -> i|10>, |10> -> i|01>, |11> -> |11>
// (up to global phase). When the receiving qubit starts in level 0 this is a
// swap followed by an S gate on the qubit that received the state; see
// ms_swap_correction.
NodeState ms_swap(NodeState node, const MSParams& params,
                  const NoiseConfig& noise);

// Single-qubit unitary (S^dagger up to global phase) that undoes the phase
// ms_swap leaves on the qubit receiving a state.
qsim::Matrix ms_swap_correction();

// Reduced purity of the two MS qubits and of the gate mode.
double spin_purity(const NodeState& node, const MSParams& params);
double motional_purity(const NodeState& node, std::size_t mode);

}  // namespace qionsim::gates
