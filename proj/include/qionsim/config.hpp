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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "qionsim/detection.hpp"
#include "qionsim/gates.hpp"
#include "qionsim/nethost.hpp"
#include "qionsim/photonics.hpp"
#include "qionsim/protocols.hpp"

namespace qionsim::config {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct DetectSweep {
  std::size_t points = 16;
  double rabi_cycles = 1.5;
  std::uint64_t photon_budget = 300;
  std::uint64_t max_cycles = 1'000'000;
};

struct IonPhotonRun {
  std::uint64_t heralds_per_basis = 50'000;
};

struct CzSweepRun {
  protocols::CzConfig cz;
  std::size_t points = 16;
  double rabi_cycles = 1.0;  // span of the Ba carrier duration
  std::uint64_t shots = 0;   // sampled Yb readouts per point, 0 for exact
};

struct MsRun {
  protocols::MsConfig ms;
  std::size_t phase_points = 16;
};

struct RamseyRun {
  protocols::Qubit qubit = protocols::Qubit::ba;
  std::size_t points = 16;
  double max_delay_t2 = 3.0;  // sweep end, in units of the active T2
  protocols::RamseyOptions options;
};

struct NetworkRun {
  std::string spec_path;  // relative paths resolve against the config file
  double duration_s = 1.0;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 1;
  protocols::NodeModel node;
  gates::NoiseConfig noise;
  protocols::CoherenceModel coherence;
  protocols::LeakageModel leakage;
  photonics::PhotonCollectionConfig photon;
  detection::BaDetectionConfig detection;
  detection::DetectionOptions detection_options;
  DetectSweep detect;
  IonPhotonRun ionphoton;
  CzSweepRun cztransfer;
  MsRun msgate;
  RamseyRun ramsey;
  NetworkRun network;

  void validate() const;
};

Json to_json(const RunConfig& config);
// Type errors name the field path, e.g. "noise.spam_error: expected a number".
RunConfig from_json(const Json& tree);

// The defaults as a tree; also the schema unknown keys are checked against.
Json default_tree();

// Merges `patch` into `base`, rejecting keys `base` does not have.
void merge_strict(Json& base, const Json& patch, const std::string& path = "");

// Sets a dotted key ("noise.heating_rate") to `value`, parsed as JSON
// when possible and kept as a string otherwise.
void set_dotted(Json& tree, const std::string& dotted_key, const std::string& value);

// Parses JSON text; syntax errors report "<source>:line:column: ...".
Json parse_text(const std::string& text, const std::string& source);

struct Overrides {
  std::vector<std::string> cli_sets;            // "key=value"
  std::map<std::string, std::string> environment;  // name -> value
};

// QIONSIM_NOISE__HEATING_RATE -> noise.heating_rate
std::string env_to_key(const std::string& name);
std::map<std::string, std::string> qionsim_environment();

// defaults < file < environment < --set.
struct Loaded {
  RunConfig config;
  Json tree;               // resolved, echoed into outputs
  std::string base_dir;    // directory of the config file, or ""
};

Loaded load(const std::string& path, const Overrides& overrides);

// Network spec document. Nodes inherit trap, drive and noise settings from
// `base` unless they override them.
nethost::NetworkSpec parse_network_spec(const Json& doc, const RunConfig& base);
nethost::NetworkSpec load_network_spec(const std::string& path, const RunConfig& base);
Json network_spec_to_json(const nethost::NetworkSpec& spec);

std::string read_file(const std::string& path);

}  // namespace qionsim::config
