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

#include "qionsim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "CLI11.hpp"

#include "qionsim/config.hpp"
#include "qionsim/crystal.hpp"
#include "qionsim/detection.hpp"
#include "qionsim/gates.hpp"
#include "qionsim/nethost.hpp"
#include "qionsim/photonics.hpp"
#include "qionsim/protocols.hpp"

namespace qionsim::cli {

namespace fs = std::filesystem;
using config::Json;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"modes",  "detect", "ionphoton", "cztransfer",
                                              "msgate", "ramsey", "network"};
  return names;
}

namespace {

// Shortest round-trip form; never locale dependent.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, end);
}

std::string num(std::uint64_t v) { return std::to_string(v); }

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : width_(header.size()) { add(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw Error("csv row width mismatch");
    add(fields);
  }
  const std::string& text() const { return text_; }

 private:
  void add(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      text_ += quote(fields[i]);
    }
    text_ += "\r\n";
  }
  static std::string quote(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

  std::size_t width_;
  std::string text_;
};

std::vector<double> linspace(double a, double b, std::size_t n, bool endpoint = true) {
  std::vector<double> v(n);
  const double denom = endpoint ? static_cast<double>(n > 1 ? n - 1 : 1) : static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / denom;
  return v;
}

Json fit_json(const protocols::SinusoidFit& f) {
  return Json{{"offset", f.offset},       {"cos_coeff", f.cos_coeff},
              {"sin_coeff", f.sin_coeff}, {"amplitude", f.amplitude},
              {"phase", f.phase},         {"residual_rms", f.residual_rms}};
}

struct Output {
  std::string csv;
  Json results;
  std::vector<std::pair<std::string, std::string>> extra_files;  // name, content
};

struct Context {
  const config::Loaded& loaded;
  const Options& options;
  std::uint64_t seed;
};

Output run_modes(const Context& ctx) {
  const auto& m = ctx.loaded.config.node;
  std::vector<std::string> header{"direction", "label", "frequency_hz"};
  for (std::size_t i = 0; i < m.chain.size(); ++i)
    header.push_back("b" + std::to_string(i) + "_" + m.chain.ions[i].name);
  Csv csv(header);
  Json mismatch = Json::object();
  Json warnings = Json::array();
  for (const std::string& w : m.trap.validate()) warnings.push_back(w);
  std::size_t rows = 0;
  for (auto d : {crystal::Direction::z, crystal::Direction::x, crystal::Direction::y}) {
    const auto set = crystal::normal_modes(m.chain, m.trap, d);
    for (const auto& mode : set.modes) {
      std::vector<std::string> r{crystal::to_string(d), mode.label, num(mode.frequency_hz)};
      for (double b : mode.eigenvector) r.push_back(num(b));
      csv.row(r);
      ++rows;
    }
    Json mm = Json::array();
    for (double v : crystal::mode_mismatch(set)) mm.push_back(v);
    mismatch[crystal::to_string(d)] = mm;
  }
  return {csv.text(), Json{{"rows", rows}, {"mode_mismatch", mismatch}, {"warnings", warnings}}, {}};
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index owns its
// output slot, so results do not depend on the thread count.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Output run_detect(const Context& ctx) {
  const auto& c = ctx.loaded.config;
  const double rabi = c.node.raman.ba_rabi_hz;
  const auto durations = linspace(0.0, c.detect.rabi_cycles / rabi, c.detect.points);
  struct Point {
    double p_up = 0.0;
    detection::CycleTally tally;
    detection::PopulationEstimate estimate;
  };
  std::vector<Point> points(durations.size());
  parallel_for(durations.size(), ctx.options.threads, [&](std::size_t i) {
    auto node = gates::make_node({crystal::ba138()}, {});
    gates::PulseParams pulse;
    pulse.rabi_freq_hz = rabi;
    pulse.duration_s = durations[i];
    node = gates::carrier(std::move(node), pulse, c.noise);
    Point& pt = points[i];
    pt.p_up = qsim::populations(node.state, 0)[1];
    Rng rng = Rng::stream(ctx.seed, "detect", i);
    pt.tally = detection::run_until_photons(detection::constant_preparation(pt.p_up),
                                            c.detect.photon_budget, c.detection, rng,
                                            c.detect.max_cycles);
    pt.estimate = detection::estimate_population(pt.tally);
  });
  Csv csv({"duration_s", "p_up_model", "p_up_estimate", "std_error", "photons", "shots"});
  std::vector<double> est;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const auto& pt = points[i];
    est.push_back(pt.estimate.p_up);
    csv.row({num(durations[i]), num(pt.p_up), num(pt.estimate.p_up), num(pt.estimate.std_error),
             num(pt.estimate.total_photons), num(pt.tally.shots)});
  }
  Json results{{"points", durations.size()}};
  if (durations.size() >= 3) {
    const auto fit = protocols::fit_sinusoid(durations, est, constants::two_pi * rabi);
    results["fit"] = fit_json(fit);
    // sin^2(pi Omega T) has a cosine amplitude of 1/2.
    results["fitted_contrast"] = 2.0 * fit.amplitude;
  }
  return {csv.text(), results, {}};
}

Output run_ionphoton(const Context& ctx) {
  const auto& c = ctx.loaded.config;
  Rng rng = Rng::stream(ctx.seed, "ionphoton");
  const auto table = photonics::correlation_experiment(
      c.photon, photonics::standard_bases(), c.ionphoton.heralds_per_basis, c.detection, rng);
  Csv csv({"basis", "photon", "heralds", "p_up", "std_error", "readout_photons"});
  for (const auto& r : table.rows) {
    csv.row({r.basis.name, "H", num(r.heralds_h), num(r.up_given_h.p_up),
             num(r.up_given_h.std_error), num(r.up_given_h.total_photons)});
    csv.row({r.basis.name, "V", num(r.heralds_v), num(r.up_given_v.p_up),
             num(r.up_given_v.std_error), num(r.up_given_v.total_photons)});
  }
  const auto exact = photonics::heralded_state(c.photon);
  Json results{{"attempts", table.attempts},
               {"heralds", table.heralds},
               {"success_probability", c.photon.success_probability()},
               {"fidelity_bound", photonics::fidelity_bound(table)},
               {"fidelity_bound_exact", photonics::fidelity_bound(exact)},
               {"fidelity_exact", qsim::fidelity(exact, photonics::ideal_pair())}};
  return {csv.text(), results, {}};
}

Output run_cztransfer(const Context& ctx) {
  const auto& c = ctx.loaded.config;
  const double rabi = c.node.raman.ba_rabi_hz;
  const auto durations =
      linspace(0.0, c.cztransfer.rabi_cycles / rabi, c.cztransfer.points, false);
  Rng rng = Rng::stream(ctx.seed, "cztransfer");
  const auto sweep = protocols::cz_transfer_sweep(durations, c.node, c.cztransfer.cz, c.noise,
                                                  rng, c.cztransfer.shots);
  Csv csv({"duration_s", "p_up", "p_up_sampled", "shots"});
  Json warnings = Json::array();
  for (const auto& p : sweep.points) {
    csv.row({num(p.duration_s), num(p.p_up), p.p_up_sampled ? num(*p.p_up_sampled) : "",
             num(p.shots)});
    for (const auto& w : p.warnings) warnings.push_back(w);
  }
  return {csv.text(),
          Json{{"efficiency", sweep.efficiency}, {"fit", fit_json(sweep.fit)},
               {"warnings", warnings}},
          {}};
}

Output run_msgate(const Context& ctx) {
  const auto& c = ctx.loaded.config;
  const auto phases = linspace(0.0, constants::two_pi, c.msgate.phase_points, false);
  const auto scan = protocols::ms_parity_scan(phases, c.node, c.msgate.ms, c.noise);
  Csv csv({"yb_phase", "parity", "parity_quadrature"});
  for (std::size_t i = 0; i < scan.phases.size(); ++i)
    csv.row({num(scan.phases[i]), num(scan.parity[i]), num(scan.parity_quadrature[i])});
  Json pops = Json::array();
  for (double p : scan.populations) pops.push_back(p);
  Json warnings = Json::array();
  for (const auto& w : scan.warnings) warnings.push_back(w);
  return {csv.text(),
          Json{{"gate_time_s", c.msgate.ms.gate_time_s},
               {"populations", pops},
               {"parity_amplitude", scan.parity_amplitude},
               {"fidelity", scan.fidelity},
               {"single_scan_fidelity", scan.single_scan_fidelity},
               {"bell_fidelity", scan.bell_fidelity},
               {"fit", fit_json(scan.fit)},
               {"fit_quadrature", fit_json(scan.fit_quadrature)},
               {"warnings", warnings}},
          {}};
}

Output run_ramsey(const Context& ctx) {
  const auto& c = ctx.loaded.config;
  const auto q = c.ramsey.qubit;
  const double t2 = q == protocols::Qubit::yb ? c.coherence.yb_t2_s : c.coherence.ba_t2_s();
  const auto delays = linspace(0.0, c.ramsey.max_delay_t2 * t2, c.ramsey.points);
  Csv csv({"delay_s", "contrast"});
  for (double t : delays)
    csv.row({num(t), num(protocols::ramsey(q, t, c.coherence, c.ramsey.options).contrast)});
  return {csv.text(),
          Json{{"qubit", q == protocols::Qubit::yb ? "yb" : "ba"},
               {"t2_model_s", t2},
               {"time_1e_s", protocols::ramsey_1e_time(q, c.coherence, c.ramsey.options)}},
          {}};
}

Output run_network(const Context& ctx) {
  const auto& c = ctx.loaded.config;
  std::string path = ctx.options.network_spec ? *ctx.options.network_spec : c.network.spec_path;
  if (path.empty()) throw ConfigError("network.spec: no network spec file given");
  if (!ctx.options.network_spec && fs::path(path).is_relative() && !ctx.loaded.base_dir.empty())
    path = (fs::path(ctx.loaded.base_dir) / path).string();
  const auto spec = config::load_network_spec(path, c);
  const double duration = ctx.options.duration_s ? *ctx.options.duration_s : c.network.duration_s;
  if (!(duration >= 0.0 && std::isfinite(duration)))
    throw ConfigError("--duration: must be a finite value >= 0");
  const auto results = nethost::simulate_replicas(spec, duration, ctx.seed, ctx.options.replicas,
                                                  ctx.options.threads);
  Csv csv({"replica", "seed", "link", "node_a", "node_b", "attempts", "heralds", "rate_hz",
           "rate_stderr_hz", "expected_rate_hz", "mean_herald_fidelity"});
  Output out;
  Json replicas = Json::array();
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& s = results[r].summary;
    for (std::size_t l = 0; l < s.at("links").size(); ++l) {
      const auto& b = s.at("links")[l];
      const auto& f = b.at("mean_herald_fidelity");
      csv.row({num(static_cast<std::uint64_t>(r)), num(s.at("seed").get<std::uint64_t>()),
               num(static_cast<std::uint64_t>(l)), b.at("endpoints")[0], b.at("endpoints")[1],
               num(b.at("attempts").get<std::uint64_t>()), num(b.at("heralds").get<std::uint64_t>()),
               num(b.at("rate_hz").get<double>()), num(b.at("rate_stderr_hz").get<double>()),
               num(b.at("expected_rate_hz").get<double>()),
               f.is_null() ? "" : num(f.get<double>())});
    }
    replicas.push_back(s);
    const std::string name = results.size() == 1
                                 ? "network_events.jsonl"
                                 : "network_events_r" + std::to_string(r) + ".jsonl";
    out.extra_files.emplace_back(name, nethost::to_jsonl(results[r].log));
  }
  out.csv = csv.text();
  out.results = Json{{"network_spec", config::network_spec_to_json(spec)},
                     {"duration_s", duration},
                     {"replicas", replicas},
                     {"aggregate", nethost::aggregate(spec, duration, results)}};
  return out;
}

// Writes every file to a temporary name first and renames once all writes
// succeeded; on any failure nothing from this run is left behind.
void commit(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<fs::path> temps, finals;
  try {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) {
      const fs::path tmp = dir / (name + ".tmp");
      temps.push_back(tmp);
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      f << content;
      f.close();
      if (!f) throw Error("cannot write " + tmp.string());
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      const fs::path final_path = dir / files[i].first;
      fs::rename(temps[i], final_path);
      finals.push_back(final_path);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : temps) fs::remove(p, ec);
    for (const auto& p : finals) fs::remove(p, ec);
    throw;
  }
}

}  // namespace

int run(const Options& options, std::ostream& out, std::ostream& err) {
  try {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), options.subcommand) == names.end())
      throw ConfigError("unknown subcommand '" + options.subcommand + "'");
    if (options.replicas == 0) throw ConfigError("--replicas: must be >= 1");
    config::Overrides ov;
    ov.cli_sets = options.sets;
    if (options.seed) ov.cli_sets.push_back("seed=" + std::to_string(*options.seed));
    if (options.read_environment) ov.environment = config::qionsim_environment();
    const auto loaded = config::load(options.config_path, ov);
    const Context ctx{loaded, options, loaded.config.seed};

    Output o;
    const auto& s = options.subcommand;
    if (s == "modes") o = run_modes(ctx);
    else if (s == "detect") o = run_detect(ctx);
    else if (s == "ionphoton") o = run_ionphoton(ctx);
    else if (s == "cztransfer") o = run_cztransfer(ctx);
    else if (s == "msgate") o = run_msgate(ctx);
    else if (s == "ramsey") o = run_ramsey(ctx);
    else o = run_network(ctx);

    Json summary;
    summary["schema_version"] = config::kSchemaVersion;
    summary["subcommand"] = s;
    summary["seed"] = ctx.seed;
    summary["config"] = loaded.tree;
    summary["results"] = o.results;
    std::vector<std::pair<std::string, std::string>> files{
        {s + ".csv", o.csv}, {s + "_summary.json", summary.dump(2) + "\n"}};
    for (auto& f : o.extra_files) files.push_back(std::move(f));
    commit(options.out_dir, files);
    out << s << ": wrote";
    for (const auto& f : files) out << ' ' << (fs::path(options.out_dir) / f.first).string();
    out << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"Mixed-species trapped-ion network node simulator"};
  app.require_subcommand(1, 1);
  Options opt;
  std::uint64_t seed = 0;
  double duration = 0.0;
  std::string spec;
  const std::map<std::string, std::string> about{
      {"modes", "normal modes of the configured chain"},
      {"detect", "Ba Rabi sweep read out by alternating-polarization detection"},
      {"ionphoton", "heralded ion-photon pairs and the two-basis fidelity bound"},
      {"cztransfer", "Ba to Yb state transfer through a shared mode"},
      {"msgate", "MS gate parity scan and Bell fidelity"},
      {"ramsey", "Ramsey contrast versus free-evolution delay"},
      {"network", "discrete-event heralded entanglement between nodes"}};
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("-c,--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", opt.sets, "override, key=value (repeatable)");
    sub->add_option("--seed", seed, "64-bit seed");
    sub->add_option("-o,--out", opt.out_dir, "output directory");
    sub->add_option("--threads", opt.threads, "worker threads (detect points, network replicas)");
    sub->add_option("--replicas", opt.replicas, "independent replicas (network)");
    sub->add_option("--duration", duration, "simulated seconds (network)");
    sub->add_option("--spec", spec, "network spec file (network)");
    sub->add_flag("!--no-env", opt.read_environment, "ignore QIONSIM_* variables");
    sub->callback([&opt, name] { opt.subcommand = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--duration")) opt.duration_s = duration;
    if (sub->count("--spec")) opt.network_spec = spec;
  }
  return run(opt, std::cout, std::cerr);
}

}  // namespace qionsim::cli
