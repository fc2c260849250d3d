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

#include "qionsim/detection.hpp"

#include <algorithm>
#include <cmath>

namespace qionsim::detection {

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError(std::string(what) + " must be in [0, 1]");
}

}  // namespace

void BaDetectionConfig::validate() const {
  check_probability(photon_detect_prob, "photon_detect_prob");
  check_probability(dark_count_per_shot, "dark_count_per_shot");
  if (!(mean_scattered_photons >= 0.0))
    throw ConfigError("mean_scattered_photons must be >= 0");
  if (photon_number == PhotonNumber::geometric && mean_scattered_photons > 0.0 &&
      mean_scattered_photons < 1.0)
    throw ConfigError(
        "geometric photon number needs mean_scattered_photons = 0 or >= 1");
}

double BaDetectionConfig::mean_detected_bright() const {
  const double n = photon_number == PhotonNumber::fixed
                       ? std::round(mean_scattered_photons)
                       : mean_scattered_photons;
  return n * photon_detect_prob;
}

double BaDetectionConfig::bright_click_probability() const {
  const double miss = 1.0 - photon_detect_prob;
  if (photon_number == PhotonNumber::fixed)
    return 1.0 - std::pow(miss, std::round(mean_scattered_photons));
  if (mean_scattered_photons == 0.0) return 0.0;
  // Generating function of the geometric law on {1, 2, ...}.
  const double q = 1.0 / mean_scattered_photons;
  return 1.0 - q * miss / (1.0 - (1.0 - q) * miss);
}

ShotResult ba_detection_shot(int level, Polarization pol,
                             const BaDetectionConfig& config, Rng& rng,
                             double efficiency_scale) {
  const bool bright = (level == 0 && pol == Polarization::sigma_plus) ||
                      (level == 1 && pol == Polarization::sigma_minus);
  ShotResult out;
  out.post_state = pol == Polarization::sigma_plus ? 1 : 0;
  if (bright && config.mean_scattered_photons > 0.0) {
    const std::uint64_t scattered =
        config.photon_number == PhotonNumber::fixed
            ? static_cast<std::uint64_t>(std::round(config.mean_scattered_photons))
            : rng.geometric_trials(1.0 / config.mean_scattered_photons);
    const double eff =
        std::clamp(config.photon_detect_prob * efficiency_scale, 0.0, 1.0);
    out.photons = rng.binomial(scattered, eff);
  }
  if (config.dark_count_per_shot > 0.0 && rng.bernoulli(config.dark_count_per_shot))
    ++out.photons;
  return out;
}

CycleTally& CycleTally::operator+=(const CycleTally& other) {
  n_sigma_plus += other.n_sigma_plus;
  n_sigma_minus += other.n_sigma_minus;
  shots += other.shots;
  return *this;
}

void DriftModel::validate() const {
  if (!(period_shots > 0.0)) throw ConfigError("drift period must be positive");
  if (!(random_walk_step >= 0.0))
    throw ConfigError("drift random walk step must be >= 0");
}

Preparation constant_preparation(double p_up) {
  check_probability(p_up, "p_up");
  return [p_up](Rng&) { return p_up; };
}

namespace {

class DriftProcess {
 public:
  DriftProcess(const DriftModel& model, std::uint64_t seed)
      : model_(model), rng_(Rng::stream(seed, "drift")) {}

  double at(std::uint64_t shot) {
    if (!model_.enabled()) return 1.0;
    if (model_.random_walk_step > 0.0) {
      while (walked_ < shot) {
        walk_ += rng_.normal(0.0, model_.random_walk_step);
        ++walked_;
      }
    }
    const double s = std::sin(constants::two_pi * static_cast<double>(shot) /
                                  model_.period_shots +
                              model_.phase);
    return std::max(0.0, 1.0 + model_.amplitude * s + walk_);
  }

 private:
  DriftModel model_;
  Rng rng_;
  double walk_ = 0.0;
  std::uint64_t walked_ = 0;
};

int sample_level(const Preparation& prepare, Rng& rng) {
  const double p = prepare(rng);
  return rng.bernoulli(std::clamp(p, 0.0, 1.0)) ? 1 : 0;
}

void record(CycleTally& tally, Polarization pol, std::uint64_t photons) {
  if (pol == Polarization::sigma_plus)
    tally.n_sigma_plus += photons;
  else
    tally.n_sigma_minus += photons;
}

}  // namespace

CycleTally run_alternating_detection(const Preparation& prepare,
                                     std::size_t cycles,
                                     const BaDetectionConfig& config, Rng& rng,
                                     const DetectionOptions& options) {
  config.validate();
  options.drift.validate();
  DriftProcess drift(options.drift, options.drift_seed);
  CycleTally tally;
  tally.shots = cycles;
  const std::uint64_t total_shots = 2 * static_cast<std::uint64_t>(cycles);
  for (std::uint64_t k = 0; k < total_shots; ++k) {
    Polarization pol;
    if (options.schedule == Schedule::alternating)
      pol = k % 2 == 0 ? Polarization::sigma_plus : Polarization::sigma_minus;
    else
      pol = k < cycles ? Polarization::sigma_plus : Polarization::sigma_minus;
    const int level = sample_level(prepare, rng);
    const auto shot = ba_detection_shot(level, pol, config, rng, drift.at(k));
    record(tally, pol, shot.photons);
  }
  return tally;
}

CycleTally run_until_photons(const Preparation& prepare,
                             std::uint64_t photon_budget,
                             const BaDetectionConfig& config, Rng& rng,
                             std::size_t max_cycles) {
  config.validate();
  CycleTally tally;
  while (tally.total() < photon_budget) {
    if (tally.shots >= max_cycles)
      throw NoDataError("photon budget not reached within the cycle limit");
    for (auto pol : {Polarization::sigma_plus, Polarization::sigma_minus}) {
      const int level = sample_level(prepare, rng);
      record(tally, pol, ba_detection_shot(level, pol, config, rng).photons);
    }
    ++tally.shots;
  }
  return tally;
}

PopulationEstimate estimate_population(const CycleTally& tally) {
  const std::uint64_t n = tally.total();
  if (n == 0) throw NoDataError("no photons collected");
  PopulationEstimate e;
  e.total_photons = n;
  e.p_up = static_cast<double>(tally.n_sigma_minus) / static_cast<double>(n);
  e.std_error = std::sqrt(e.p_up * (1.0 - e.p_up) / static_cast<double>(n));
  return e;
}

int yb_detect(const qsim::QuantumState& state, std::size_t target,
              double spam_error, Rng& rng) {
  check_probability(spam_error, "spam_error");
  if (target >= state.spec().size() ||
      state.spec().at(target).kind != qsim::Subsystem::Kind::qubit)
    throw DimensionError("yb_detect target is not a qubit subsystem");
  const auto pops = qsim::populations(state, target);
  int bit = rng.bernoulli(std::clamp(pops[1], 0.0, 1.0)) ? 1 : 0;
  if (spam_error > 0.0 && rng.bernoulli(spam_error)) bit ^= 1;
  return bit;
}

}  // namespace qionsim::detection
