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

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qionsim {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: config values, dimensions, indices.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// An iterative solver (minimizer, integrator) failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// A physical configuration with no stable equilibrium.
class UnstableError : public Error {
 public:
  using Error::Error;
};

// An estimator was asked for a value with no supporting data.
class NoDataError : public Error {
 public:
  using Error::Error;
};

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double epsilon0 = 8.8541878128e-12;      // F/m
inline constexpr double amu = 1.66053906660e-27;          // kg
}  // namespace constants

// Seeded pseudo-random stream. All sampling in the library goes through an
// explicitly passed Rng; nothing touches global random state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream keyed by (seed, stream id, sub id). Adding a stream for
  // a new entity never changes the draws of existing ones.
  static Rng stream(std::uint64_t seed, std::string_view stream_name,
                    std::uint64_t index = 0);

  // Uniform in [0, 1).
  double uniform();
  bool bernoulli(double p);
  // Exponential with the given mean (mean > 0).
  double exponential(double mean);
  // Number of Bernoulli(p) trials up to and including the first success;
  // support {1, 2, ...}. p must be in (0, 1].
  std::uint64_t geometric_trials(double p);
  std::uint64_t binomial(std::uint64_t n, double p);
  double normal(double mean, double stddev);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace qionsim
