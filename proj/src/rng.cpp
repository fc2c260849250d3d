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
#include <limits>

#include "qionsim/common.hpp"

namespace qionsim {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng Rng::stream(std::uint64_t seed, std::string_view stream_name,
                std::uint64_t index) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ hash_name(stream_name));
  s = splitmix64(s ^ index);
  return Rng(s);
}

double Rng::uniform() {
  // 53 random mantissa bits; identical on every standard library.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

bool Rng::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform() < p;
}

double Rng::exponential(double mean) {
  if (!(mean > 0.0)) throw ConfigError("exponential mean must be positive");
  return -mean * std::log1p(-uniform());
}

std::uint64_t Rng::geometric_trials(double p) {
  if (!(p > 0.0) || p > 1.0)
    throw ConfigError("geometric success probability must be in (0, 1]");
  if (p == 1.0) return 1;
  const double u = 1.0 - uniform();  // (0, 1]
  const double k = std::floor(std::log(u) / std::log1p(-p));
  if (k >= 9.0e18) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(k) + 1;
}

std::uint64_t Rng::binomial(std::uint64_t n, double p) {
  std::uint64_t k = 0;
  for (std::uint64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
  return k;
}

double Rng::normal(double mean, double stddev) {
  // Box-Muller on our own uniforms keeps draws library-independent.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                    std::cos(constants::two_pi * u2);
}

}  // namespace qionsim
