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
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "qionsim/gates.hpp"
#include "qionsim/photonics.hpp"
#include "qionsim/protocols.hpp"

namespace qionsim::nethost {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class Role { communication, memory };

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct NodeSpec {
  std::string id;
  protocols::NodeModel model;  // chain, trap, drive, swap mode
  std::vector<Role> roles;     // one per ion
  gates::NoiseConfig noise;
  protocols::CoherenceModel coherence;
  protocols::LeakageModel leakage;
  protocols::MsConfig ms;
  bool initially_shelved = false;  // communication ions start in D5/2

  std::vector<std::size_t> ions_with(Role r) const;
};

struct LinkSpec {
  std::string node_a;
  std::string node_b;
  double attempt_period_s = 2e-6;
  double herald_latency_s = 0.0;
  photonics::PhotonCollectionConfig photon_a;
  photonics::PhotonCollectionConfig photon_b;
  double bsa_visibility = 1.0;
};

enum class BsaSwitch {
  dedicated,  // every link has its own analyzer
  shared,     // one analyzer, links served round-robin one herald at a time
};

struct NetworkSpec {
  int schema_version = kSchemaVersion;
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  BsaSwitch bsa_switch = BsaSwitch::dedicated;
  bool swap_to_memory = false;
  double checkpoint_interval_s = 0.0;  // 0 disables periodic checkpoints
  // Memory pairs holding psi+ at t = 0, as (node id, node id).
  std::vector<std::pair<std::string, std::string>> memory_pairs;

  // Throws ConfigError naming the offending field, e.g. "links[0].endpoints".
  void validate() const;
  std::size_t node_index(const std::string& id) const;
};

// p_a * p_b * P(BSA herald) for one attempt of the link.
double link_success_probability(const LinkSpec& link);

struct Event {
  double time_s = 0.0;
  std::string kind;  // attempt, herald, swap, leak, recover, decohere-checkpoint
  Json payload;
};

using EventLog = std::vector<Event>;

Json to_json(const Event& e);
Event event_from_json(const Json& j);
std::string to_jsonl(const EventLog& log);
EventLog parse_jsonl(const std::string& text);

struct SimulationResult {
  EventLog log;
  Json summary;
};

// Deterministic in (spec, duration, seed).
SimulationResult simulate(const NetworkSpec& spec, double duration_s,
                          std::uint64_t seed);

// Summary statistics computed from the log alone.
Json summarize(const NetworkSpec& spec, double duration_s, std::uint64_t seed,
               const EventLog& log);

// Independent replicas seeded seed, seed + 1, ...; results in seed order
// regardless of `threads`.
std::vector<SimulationResult> simulate_replicas(const NetworkSpec& spec,
                                                double duration_s,
                                                std::uint64_t seed,
                                                std::size_t replicas,
                                                std::size_t threads);

// Pools per-link counts over replicas. Only sums are combined, so merging in
// any grouping gives the same result.
Json aggregate(const NetworkSpec& spec, double duration_s,
               const std::vector<SimulationResult>& results);

// Single-qubit map carried from the communication ion to the memory ion by
// the corrected MS swap, as a 4x4 superoperator acting on the row-major
// vectorized density matrix.
qsim::Matrix swap_superoperator(const NodeSpec& node);

// Applies a single-qubit superoperator to one side (0 or 1) of a pair.
qsim::Matrix apply_to_side(const qsim::Matrix& pair_rho,
                           const qsim::Matrix& superop, int side);

}  // namespace qionsim::nethost
