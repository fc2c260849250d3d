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
#include <functional>

#include "qionsim/common.hpp"
#include "qionsim/qsim.hpp"

namespace qionsim::detection {

enum class Polarization { sigma_plus, sigma_minus };

// Distribution of photons scattered by a bright ion before it is pumped dark.
enum class PhotonNumber {
  geometric,  // memoryless pumping, support {1, 2, ...}
  fixed,      // exactly round(mean) photons
};

struct BaDetectionConfig {
  double photon_detect_prob = 0.08;
  double mean_scattered_photons = 3.0;
  double dark_count_per_shot = 0.0;
  std::size_t shots_per_polarization = 1250;
  PhotonNumber photon_number = PhotonNumber::geometric;

  void validate() const;
  // Expected detected photons per bright shot.
  double mean_detected_bright() const;
  // Probability that a bright shot yields at least one detected photon.
  double bright_click_probability() const;
};

struct ShotResult {
  std::uint64_t photons = 0;
  int post_state = 0;  // qubit level after optical pumping
};

// One detection shot on a sampled qubit level (0 = down, 1 = up). A sigma+
// shot leaves the ion in up, a sigma- shot in down. `efficiency_scale`
// multiplies the per-photon detection probability (collection drift).
ShotResult ba_detection_shot(int level, Polarization pol,
                             const BaDetectionConfig& config, Rng& rng,
                             double efficiency_scale = 1.0);

struct CycleTally {
  std::uint64_t n_sigma_plus = 0;
  std::uint64_t n_sigma_minus = 0;
  std::uint64_t shots = 0;  // per polarization

  std::uint64_t total() const { return n_sigma_plus + n_sigma_minus; }
  CycleTally& operator+=(const CycleTally& other);
};

// Multiplicative collection-efficiency drift indexed by global shot number:
// 1 + amplitude * sin(2 pi k / period + phase) plus an optional random walk.
struct DriftModel {
  double amplitude = 0.0;
  double period_shots = 1e4;
  double phase = 0.0;
  double random_walk_step = 0.0;  // std dev per shot

  bool enabled() const { return amplitude != 0.0 || random_walk_step != 0.0; }
  void validate() const;
};

enum class Schedule {
  alternating,  // sigma+ and sigma- on every other shot
  blocked,      // all sigma+ shots first, then all sigma- shots
};

// Returns the up-state probability of a freshly prepared experiment.
using Preparation = std::function<double(Rng&)>;

Preparation constant_preparation(double p_up);

struct DetectionOptions {
  Schedule schedule = Schedule::alternating;
  DriftModel drift;
  std::uint64_t drift_seed = 0;
};

// `cycles` shots per polarization.
CycleTally run_alternating_detection(const Preparation& prepare,
                                     std::size_t cycles,
                                     const BaDetectionConfig& config, Rng& rng,
                                     const DetectionOptions& options = {});

// Alternating cycles until at least `photon_budget` photons are collected.
// Throws NoDataError if `max_cycles` pass without reaching the budget.
CycleTally run_until_photons(const Preparation& prepare,
                             std::uint64_t photon_budget,
                             const BaDetectionConfig& config, Rng& rng,
                             std::size_t max_cycles = 1'000'000);

struct PopulationEstimate {
  double p_up = 0.0;
  double std_error = 0.0;
  std::uint64_t total_photons = 0;
};

// p_up = n(sigma-) / total; throws NoDataError without photons.
PopulationEstimate estimate_population(const CycleTally& tally);

// Projective z readout of qubit subsystem `target` followed by a readout
// flip with probability `spam_error`.
int yb_detect(const qsim::QuantumState& state, std::size_t target,
              double spam_error, Rng& rng);

}  // namespace qionsim::detection
