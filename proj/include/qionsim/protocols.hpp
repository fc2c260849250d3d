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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qionsim/common.hpp"
#include "qionsim/crystal.hpp"
#include "qionsim/gates.hpp"

namespace qionsim::protocols {

struct EITCoolingModel {
  double target_nbar_op = 0.06;
  double target_nbar_ip = 0.1;

  void validate() const;
  // "IP" gets the in-phase value, every other label the out-of-phase one.
  double nbar(const std::string& label) const;
};

struct CoherenceModel {
  double yb_t2_s = 1.5;
  double ba_t2_bare_s = 100e-6;
  double ba_t2_compensated_s = 4e-3;
  double ba_zeeman_khz_per_mg = 2.8;
  bool compensation_enabled = false;

  void validate() const;
  double ba_t2_s() const;
  // RMS quasi-static field noise (mG) implied by the active Ba T2.
  double ba_field_noise_mg() const;
};

enum class Qubit { ba, yb };

// Ramsey coherence factor after `delay_s` of free evolution. Ba averages a
// Gaussian-distributed static Zeeman shift (Gaussian decay), Yb decays
// exponentially.
double coherence_factor(Qubit qubit, double delay_s, const CoherenceModel& model);

struct LeakageModel {
  double shelve_prob_per_scatter = 0.0;
  double d52_lifetime_s = 32.0;
  double deshelve_time_with_led_s = 0.030;
  bool led_on = true;

  void validate() const;
  // Mean time to return from the shelved level.
  double mean_recovery_s() const;
};

// Raman drive used for carriers and sidebands.
struct RamanConfig {
  double ba_rabi_hz = 250e3;
  double yb_rabi_hz = 250e3;
  double ba_wavelength_m = 532e-9;
  double yb_wavelength_m = 355e-9;
  double beam_angle_rad = constants::pi;  // counter-propagating

  void validate() const;
};

struct ModeSelection {
  crystal::Direction direction = crystal::Direction::z;
  std::string label = "OP";
};

// Static description of one trap and its control fields.
struct NodeModel {
  crystal::IonChain chain{{crystal::ba138(), crystal::yb171()}};
  crystal::TrapConfig trap;
  EITCoolingModel eit;
  RamanConfig raman;
  ModeSelection mode;
  int n_max = qsim::kDefaultNMax;

  void validate() const;
  std::size_t ba_index() const;  // first Ba138 ion
  std::size_t yb_index() const;  // first Yb171 ion
  double rabi_hz(std::size_t ion) const;
  double delta_k(std::size_t ion) const;
};

struct Prepared {
  gates::NodeState node;
  crystal::Mode mode;
  double nbar = 0.0;
  std::vector<double> eta;  // per ion, on the selected mode
  std::vector<std::string> warnings;
};

// Qubits in |down>, |Down>; the selected mode thermal at the EIT n-bar.
// With `rng` each qubit is flipped with probability `spam_error` (one
// sampled preparation); without it the flips enter as a mixture.
Prepared prepare(const NodeModel& model, double spam_error, Rng* rng = nullptr);

struct CzConfig {
  // Sideband pulse area relative to a nominal n = 1 pi pulse.
  double rsb_area_scale = 1.0;
  // RMS random optical phase per pulse when beam paths are not stabilized.
  double optical_phase_jitter_rad = 0.0;

  void validate() const;
};

struct CzPoint {
  double duration_s = 0.0;
  double p_up = 0.0;  // ensemble P(Up), readout SPAM included
  std::optional<double> p_up_sampled;  // yb_detect frequency
  std::uint64_t shots = 0;
  std::vector<std::string> warnings;
};

// Carrier R(T) on Ba, RSB pi on Ba, RSB pi on Yb, then Yb readout. `shots`
// > 0 adds sampled readouts through yb_detect.
CzPoint cz_transfer(double duration_s, const NodeModel& model,
                    const CzConfig& cz, const gates::NoiseConfig& noise,
                    Rng& rng, std::uint64_t shots = 0);

// c0 + b cos(w t) + c sin(w t); amplitude = sqrt(b^2 + c^2).
struct SinusoidFit {
  double offset = 0.0;
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;  // atan2(c, b)
  double residual_rms = 0.0;
};

SinusoidFit fit_sinusoid(const std::vector<double>& x,
                         const std::vector<double>& y, double angular_freq);

struct CzSweep {
  std::vector<CzPoint> points;
  SinusoidFit fit;
  double efficiency = 0.0;  // peak-to-peak of the fitted fringe
};

CzSweep cz_transfer_sweep(const std::vector<double>& durations_s,
                          const NodeModel& model, const CzConfig& cz,
                          const gates::NoiseConfig& noise, Rng& rng,
                          std::uint64_t shots = 0);

// Ba superposition (down + up)/sqrt(2) mapped to Yb; returns 2 |rho_01| of
// Yb averaged over `samples` draws of the optical phase jitter.
double cz_coherence_transfer(const NodeModel& model, const CzConfig& cz,
                             const gates::NoiseConfig& noise, Rng& rng,
                             std::size_t samples = 64);

struct MsConfig {
  // Calibration constant: single-loop gate time at which the default
  // heating rate yields the target Bell fidelity.
  double gate_time_s = 340e-6;
  double force_phase = 0.0;
  double ba_analysis_phase = 0.0;

  void validate() const;
  gates::MSParams params(const NodeModel& model) const;
};

struct ParityScan {
  // Populations right after the gate, indexed 2 * ba + yb.
  std::array<double, 4> populations{};
  std::vector<double> phases;
  std::vector<double> parity;             // Ba at ba_analysis_phase
  std::vector<double> parity_quadrature;  // Ba at ba_analysis_phase + pi/2
  SinusoidFit fit;             // parity versus Yb analysis phase
  SinusoidFit fit_quadrature;
  // Yb-scan fringe amplitude carried by rho(DownDown, UpUp) alone, from the
  // two fitted phasors; the odd-parity coherence cancels.
  double parity_amplitude = 0.0;
  double fidelity = 0.0;               // (P00 + P11)/2 + parity_amplitude/2
  double single_scan_fidelity = 0.0;   // same with fit.amplitude
  double bell_fidelity = 0.0;          // overlap with ms_target_state
  std::vector<std::string> warnings;
};

// MS gate, then pi/2 pulses on both ions with the Yb phase scanned at two
// fixed Ba phases. A single fixed-Ba scan mixes in rho(DownUp, UpDown),
// which heating populates. Optical phase jitter does not enter: the spin
// phase is set by the rf beat note.
ParityScan ms_parity_scan(const std::vector<double>& phases,
                          const NodeModel& model, const MsConfig& ms,
                          const gates::NoiseConfig& noise);

// Bell state the ideal gate produces from |Down,down>, ion order as in the
// node (2-qubit vector, index 2 * first + second).
qsim::Vector ms_target_state(double force_phase);

struct RamseyOptions {
  std::size_t phase_points = 16;
  bool ba_illumination = false;  // strong scattering on Ba during the wait
};

struct RamseyResult {
  double contrast = 0.0;
  std::vector<double> phases;
  std::vector<double> p_up;
};

// pi/2, wait, phase-scanned pi/2 on a Ba-Yb pair; contrast is the fitted
// fringe amplitude of the addressed qubit.
RamseyResult ramsey(Qubit qubit, double delay_s, const CoherenceModel& model,
                    const RamseyOptions& options = {});

// Delay at which the Ramsey contrast falls to 1/e, by bisection.
double ramsey_1e_time(Qubit qubit, const CoherenceModel& model,
                      const RamseyOptions& options = {});

struct AvailabilitySegment {
  double start_s = 0.0;
  double end_s = 0.0;
  bool available = true;
};

struct LeakageOutcome {
  gates::NodeState node;
  std::vector<AvailabilitySegment> timeline;  // tiles the window
  std::vector<double> recovery_times_s;       // completed shelving episodes
  std::size_t shelving_events = 0;
  std::optional<double> pending_recovery_s;  // absolute time, if still dark
};

// Scatter events on `ion` at the given times inside [start, end]. Each
// event shelves an available ion with probability shelve_prob_per_scatter;
// a shelved ion ignores further scatters until it recovers. An ion that
// starts unavailable draws a fresh recovery time at `start`.
LeakageOutcome leakage_step(gates::NodeState node, std::size_t ion,
                            std::vector<double> scatter_times_s,
                            double start_s, double end_s,
                            const LeakageModel& model, Rng& rng);

}  // namespace qionsim::protocols
