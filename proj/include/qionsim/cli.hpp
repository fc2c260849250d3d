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
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qionsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct Options {
  std::string subcommand;  // modes, detect, ionphoton, cztransfer, msgate, ramsey, network
  std::string config_path;
  std::vector<std::string> sets;  // key=value
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::size_t threads = 1;
  std::size_t replicas = 1;
  std::optional<double> duration_s;
  std::optional<std::string> network_spec;
  bool read_environment = true;
};

const std::vector<std::string>& subcommands();

// Runs one subcommand and writes `<subcommand>.csv` and
// `<subcommand>_summary.json` (plus event logs for `network`) into
// `out_dir`. Returns an exit code; diagnostics go to `err`.
int run(const Options& options, std::ostream& out, std::ostream& err);

// argv front end.
int main(int argc, char** argv);

}  // namespace qionsim::cli
