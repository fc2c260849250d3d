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

#include "qionsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

extern char** environ;

namespace qionsim::config {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void type_error(const std::string& path, const char* expected) {
  throw ConfigError(path + ": expected " + expected);
}

const Json* find(const Json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void read(const Json& obj, const std::string& path, const std::string& key, double& out) {
  const Json* j = find(obj, key);
  if (!j) return;
  if (!j->is_number()) type_error(join(path, key), "a number");
  out = j->get<double>();
}

void read(const Json& obj, const std::string& path, const std::string& key, bool& out) {
  const Json* j = find(obj, key);
  if (!j) return;
  if (!j->is_boolean()) type_error(join(path, key), "true or false");
  out = j->get<bool>();
}

std::uint64_t as_count(const Json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) type_error(where, "a non-negative integer");
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    // Accept 1e5 and friends.
    if (v >= 0.0 && v < 1.8e19 && std::floor(v) == v) return static_cast<std::uint64_t>(v);
  }
  type_error(where, "a non-negative integer");
}

void read(const Json& obj, const std::string& path, const std::string& key, std::uint64_t& out) {
  if (const Json* j = find(obj, key)) out = as_count(*j, join(path, key));
}

void read(const Json& obj, const std::string& path, const std::string& key, int& out) {
  const Json* j = find(obj, key);
  if (!j) return;
  if (!j->is_number_integer() && !(j->is_number_float() &&
                                   std::floor(j->get<double>()) == j->get<double>()))
    type_error(join(path, key), "an integer");
  const double v = j->get<double>();
  if (std::abs(v) > 1e9) type_error(join(path, key), "an integer of modest size");
  out = static_cast<int>(v);
}

void read(const Json& obj, const std::string& path, const std::string& key, std::string& out) {
  const Json* j = find(obj, key);
  if (!j) return;
  if (!j->is_string()) type_error(join(path, key), "a string");
  out = j->get<std::string>();
}

// Enumerations are written as strings.
template <typename E>
void read_enum(const Json& obj, const std::string& path, const std::string& key, E& out,
               const std::vector<std::pair<std::string, E>>& names) {
  std::string s;
  if (!find(obj, key)) return;
  read(obj, path, key, s);
  for (const auto& [name, value] : names)
    if (name == s) {
      out = value;
      return;
    }
  std::string list;
  for (const auto& [name, value] : names) list += (list.empty() ? "" : ", ") + name;
  throw ConfigError(join(path, key) + ": '" + s + "' is not one of " + list);
}

template <typename E>
std::string enum_name(E value, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  throw Error("unnamed enumeration value");
}

const Json& object_at(const Json& obj, const std::string& path, const std::string& key) {
  static const Json empty = Json::object();
  const Json* j = find(obj, key);
  if (!j) return empty;
  if (!j->is_object()) type_error(join(path, key), "an object");
  return *j;
}

const std::vector<std::pair<std::string, gates::CrosstalkMode>> kCrosstalk{
    {"off", gates::CrosstalkMode::off},
    {"raw", gates::CrosstalkMode::raw},
    {"suppressed", gates::CrosstalkMode::suppressed}};
const std::vector<std::pair<std::string, detection::PhotonNumber>> kPhotonNumber{
    {"geometric", detection::PhotonNumber::geometric},
    {"fixed", detection::PhotonNumber::fixed}};
const std::vector<std::pair<std::string, detection::Schedule>> kSchedule{
    {"alternating", detection::Schedule::alternating},
    {"blocked", detection::Schedule::blocked}};
const std::vector<std::pair<std::string, protocols::Qubit>> kQubit{
    {"ba", protocols::Qubit::ba}, {"yb", protocols::Qubit::yb}};
const std::vector<std::pair<std::string, crystal::Direction>> kDirection{
    {"x", crystal::Direction::x}, {"y", crystal::Direction::y}, {"z", crystal::Direction::z}};
const std::vector<std::pair<std::string, nethost::BsaSwitch>> kSwitch{
    {"dedicated", nethost::BsaSwitch::dedicated}, {"shared", nethost::BsaSwitch::shared}};

crystal::Species species(const Json& j, const std::string& where) {
  if (!j.is_string()) type_error(where, "a species name");
  auto s = crystal::species_by_name(j.get<std::string>());
  if (!s) throw ConfigError(where + ": unknown species '" + j.get<std::string>() + "'");
  return *s;
}

Json chain_json(const crystal::IonChain& chain) {
  Json ions = Json::array();
  for (const auto& s : chain.ions) ions.push_back(s.name);
  return ions;
}

crystal::IonChain chain_from(const Json& j, const std::string& where) {
  if (!j.is_array()) type_error(where, "a list of species names");
  crystal::IonChain chain;
  for (std::size_t i = 0; i < j.size(); ++i)
    chain.ions.push_back(species(j[i], where + "[" + std::to_string(i) + "]"));
  return chain;
}

Json noise_json(const gates::NoiseConfig& n) {
  return Json{{"heating_rate", n.heating_rate_per_ms},
              {"spam_error", n.spam_error},
              {"scatter_per_rabi_cycle", n.scatter_per_rabi_cycle},
              {"crosstalk",
               {{"mode", enum_name(n.crosstalk.mode, kCrosstalk)},
                {"ratio_532_on_yb", n.crosstalk.ratio_532_on_yb},
                {"ratio_355_on_ba", n.crosstalk.ratio_355_on_ba},
                {"suppressed_ratio", n.crosstalk.suppressed_ratio}}}};
}

void noise_from(const Json& j, const std::string& p, gates::NoiseConfig& n) {
  read(j, p, "heating_rate", n.heating_rate_per_ms);  // quanta per ms
  read(j, p, "spam_error", n.spam_error);
  read(j, p, "scatter_per_rabi_cycle", n.scatter_per_rabi_cycle);
  const std::string cp = join(p, "crosstalk");
  const Json& c = object_at(j, p, "crosstalk");
  read_enum(c, cp, "mode", n.crosstalk.mode, kCrosstalk);
  read(c, cp, "ratio_532_on_yb", n.crosstalk.ratio_532_on_yb);
  read(c, cp, "ratio_355_on_ba", n.crosstalk.ratio_355_on_ba);
  read(c, cp, "suppressed_ratio", n.crosstalk.suppressed_ratio);
}

Json coherence_json(const protocols::CoherenceModel& c) {
  return Json{{"yb_t2_s", c.yb_t2_s},
              {"ba_t2_bare_s", c.ba_t2_bare_s},
              {"ba_t2_compensated_s", c.ba_t2_compensated_s},
              {"ba_zeeman_khz_per_mg", c.ba_zeeman_khz_per_mg},
              {"compensation_enabled", c.compensation_enabled}};
}

void coherence_from(const Json& j, const std::string& p, protocols::CoherenceModel& c) {
  read(j, p, "yb_t2_s", c.yb_t2_s);
  read(j, p, "ba_t2_bare_s", c.ba_t2_bare_s);
  read(j, p, "ba_t2_compensated_s", c.ba_t2_compensated_s);
  read(j, p, "ba_zeeman_khz_per_mg", c.ba_zeeman_khz_per_mg);
  read(j, p, "compensation_enabled", c.compensation_enabled);
}

Json leakage_json(const protocols::LeakageModel& l) {
  return Json{{"shelve_prob_per_scatter", l.shelve_prob_per_scatter},
              {"d52_lifetime_s", l.d52_lifetime_s},
              {"deshelve_time_with_led_s", l.deshelve_time_with_led_s},
              {"led_on", l.led_on}};
}

void leakage_from(const Json& j, const std::string& p, protocols::LeakageModel& l) {
  read(j, p, "shelve_prob_per_scatter", l.shelve_prob_per_scatter);
  read(j, p, "d52_lifetime_s", l.d52_lifetime_s);
  read(j, p, "deshelve_time_with_led_s", l.deshelve_time_with_led_s);
  read(j, p, "led_on", l.led_on);
}

Json photon_json(const photonics::PhotonCollectionConfig& c) {
  return Json{{"excitation_prob", c.excitation_prob},
              {"solid_angle_fraction", c.solid_angle_fraction},
              {"detector_efficiency", c.detector_efficiency},
              {"decay_branching", c.decay_branching},
              {"polarization_mixing_error", c.polarization_mixing_error},
              {"double_excitation_error", c.double_excitation_error},
              {"spam_error", c.spam_error}};
}

void photon_from(const Json& j, const std::string& p, photonics::PhotonCollectionConfig& c) {
  read(j, p, "excitation_prob", c.excitation_prob);
  read(j, p, "solid_angle_fraction", c.solid_angle_fraction);
  read(j, p, "detector_efficiency", c.detector_efficiency);
  read(j, p, "decay_branching", c.decay_branching);
  read(j, p, "polarization_mixing_error", c.polarization_mixing_error);
  read(j, p, "double_excitation_error", c.double_excitation_error);
  read(j, p, "spam_error", c.spam_error);
}

Json ms_json(const protocols::MsConfig& m) {
  return Json{{"gate_time_s", m.gate_time_s},
              {"force_phase", m.force_phase},
              {"ba_analysis_phase", m.ba_analysis_phase}};
}

void ms_from(const Json& j, const std::string& p, protocols::MsConfig& m) {
  read(j, p, "gate_time_s", m.gate_time_s);
  read(j, p, "force_phase", m.force_phase);
  read(j, p, "ba_analysis_phase", m.ba_analysis_phase);
}

template <typename F>
void located(const std::string& where, F&& check) {
  try {
    check();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (schema_version != kSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(schema_version));
  located("node", [&] { node.validate(); });
  located("noise", [&] { noise.validate(); });
  located("coherence", [&] { coherence.validate(); });
  located("leakage", [&] { leakage.validate(); });
  located("photon", [&] { photon.validate(); });
  located("detection", [&] {
    detection.validate();
    detection_options.drift.validate();
  });
  if (detect.points == 0) throw ConfigError("detect.points: must be >= 1");
  if (!(detect.rabi_cycles > 0.0)) throw ConfigError("detect.rabi_cycles: must be > 0");
  if (detect.photon_budget == 0) throw ConfigError("detect.photon_budget: must be >= 1");
  if (ionphoton.heralds_per_basis == 0)
    throw ConfigError("ionphoton.heralds_per_basis: must be >= 1");
  located("cztransfer", [&] { cztransfer.cz.validate(); });
  if (cztransfer.points < 3) throw ConfigError("cztransfer.points: need at least 3 for a fit");
  if (!(cztransfer.rabi_cycles > 0.0)) throw ConfigError("cztransfer.rabi_cycles: must be > 0");
  located("msgate", [&] { msgate.ms.validate(); });
  if (msgate.phase_points < 3) throw ConfigError("msgate.phase_points: need at least 3 for a fit");
  if (ramsey.points == 0) throw ConfigError("ramsey.points: must be >= 1");
  if (!(ramsey.max_delay_t2 > 0.0)) throw ConfigError("ramsey.max_delay_t2: must be > 0");
  if (ramsey.options.phase_points < 3)
    throw ConfigError("ramsey.phase_points: need at least 3 for a fit");
  if (!(network.duration_s >= 0.0 && std::isfinite(network.duration_s)))
    throw ConfigError("network.duration_s: must be a finite value >= 0");
}

Json to_json(const RunConfig& c) {
  const auto& m = c.node;
  Json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["chain"] = Json{{"ions", chain_json(m.chain)}};
  j["trap"] = Json{{"axial_freq_hz", m.trap.axial_freq_hz},
                   {"transverse_freq_x_hz", m.trap.transverse_freq_x_hz},
                   {"transverse_freq_y_hz", m.trap.transverse_freq_y_hz},
                   {"reference_species", m.trap.reference_species.name}};
  j["mode"] = Json{{"direction", enum_name(m.mode.direction, kDirection)},
                   {"label", m.mode.label},
                   {"n_max", m.n_max}};
  j["eit"] = Json{{"target_nbar_op", m.eit.target_nbar_op},
                  {"target_nbar_ip", m.eit.target_nbar_ip}};
  j["raman"] = Json{{"ba_rabi_hz", m.raman.ba_rabi_hz},
                    {"yb_rabi_hz", m.raman.yb_rabi_hz},
                    {"ba_wavelength_m", m.raman.ba_wavelength_m},
                    {"yb_wavelength_m", m.raman.yb_wavelength_m},
                    {"beam_angle_rad", m.raman.beam_angle_rad}};
  j["noise"] = noise_json(c.noise);
  j["coherence"] = coherence_json(c.coherence);
  j["leakage"] = leakage_json(c.leakage);
  j["photon"] = photon_json(c.photon);
  const auto& d = c.detection;
  const auto& o = c.detection_options;
  j["detection"] = Json{{"photon_detect_prob", d.photon_detect_prob},
                        {"mean_scattered_photons", d.mean_scattered_photons},
                        {"dark_count_per_shot", d.dark_count_per_shot},
                        {"shots_per_polarization", d.shots_per_polarization},
                        {"photon_number", enum_name(d.photon_number, kPhotonNumber)},
                        {"schedule", enum_name(o.schedule, kSchedule)},
                        {"drift",
                         {{"amplitude", o.drift.amplitude},
                          {"period_shots", o.drift.period_shots},
                          {"phase", o.drift.phase},
                          {"random_walk_step", o.drift.random_walk_step}}}};
  j["detect"] = Json{{"points", c.detect.points},
                     {"rabi_cycles", c.detect.rabi_cycles},
                     {"photon_budget", c.detect.photon_budget},
                     {"max_cycles", c.detect.max_cycles}};
  j["ionphoton"] = Json{{"heralds_per_basis", c.ionphoton.heralds_per_basis}};
  j["cztransfer"] = Json{{"rsb_area_scale", c.cztransfer.cz.rsb_area_scale},
                         {"optical_phase_jitter_rad", c.cztransfer.cz.optical_phase_jitter_rad},
                         {"points", c.cztransfer.points},
                         {"rabi_cycles", c.cztransfer.rabi_cycles},
                         {"shots", c.cztransfer.shots}};
  j["msgate"] = ms_json(c.msgate.ms);
  j["msgate"]["phase_points"] = c.msgate.phase_points;
  j["ramsey"] = Json{{"qubit", enum_name(c.ramsey.qubit, kQubit)},
                     {"points", c.ramsey.points},
                     {"max_delay_t2", c.ramsey.max_delay_t2},
                     {"phase_points", c.ramsey.options.phase_points},
                     {"ba_illumination", c.ramsey.options.ba_illumination}};
  j["network"] = Json{{"spec", c.network.spec_path}, {"duration_s", c.network.duration_s}};
  return j;
}

RunConfig from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object at the top level");
  RunConfig c;
  read(j, "", "schema_version", c.schema_version);
  read(j, "", "seed", c.seed);
  auto& m = c.node;
  const Json& chain = object_at(j, "", "chain");
  if (const Json* ions = find(chain, "ions")) m.chain = chain_from(*ions, "chain.ions");
  const Json& trap = object_at(j, "", "trap");
  read(trap, "trap", "axial_freq_hz", m.trap.axial_freq_hz);
  read(trap, "trap", "transverse_freq_x_hz", m.trap.transverse_freq_x_hz);
  read(trap, "trap", "transverse_freq_y_hz", m.trap.transverse_freq_y_hz);
  if (const Json* r = find(trap, "reference_species"))
    m.trap.reference_species = species(*r, "trap.reference_species");
  const Json& mode = object_at(j, "", "mode");
  read_enum(mode, "mode", "direction", m.mode.direction, kDirection);
  read(mode, "mode", "label", m.mode.label);
  read(mode, "mode", "n_max", m.n_max);
  const Json& eit = object_at(j, "", "eit");
  read(eit, "eit", "target_nbar_op", m.eit.target_nbar_op);
  read(eit, "eit", "target_nbar_ip", m.eit.target_nbar_ip);
  const Json& raman = object_at(j, "", "raman");
  read(raman, "raman", "ba_rabi_hz", m.raman.ba_rabi_hz);
  read(raman, "raman", "yb_rabi_hz", m.raman.yb_rabi_hz);
  read(raman, "raman", "ba_wavelength_m", m.raman.ba_wavelength_m);
  read(raman, "raman", "yb_wavelength_m", m.raman.yb_wavelength_m);
  read(raman, "raman", "beam_angle_rad", m.raman.beam_angle_rad);
  noise_from(object_at(j, "", "noise"), "noise", c.noise);
  coherence_from(object_at(j, "", "coherence"), "coherence", c.coherence);
  leakage_from(object_at(j, "", "leakage"), "leakage", c.leakage);
  photon_from(object_at(j, "", "photon"), "photon", c.photon);
  const Json& det = object_at(j, "", "detection");
  read(det, "detection", "photon_detect_prob", c.detection.photon_detect_prob);
  read(det, "detection", "mean_scattered_photons", c.detection.mean_scattered_photons);
  read(det, "detection", "dark_count_per_shot", c.detection.dark_count_per_shot);
  read(det, "detection", "shots_per_polarization", c.detection.shots_per_polarization);
  read_enum(det, "detection", "photon_number", c.detection.photon_number, kPhotonNumber);
  read_enum(det, "detection", "schedule", c.detection_options.schedule, kSchedule);
  const Json& drift = object_at(det, "detection", "drift");
  auto& dm = c.detection_options.drift;
  read(drift, "detection.drift", "amplitude", dm.amplitude);
  read(drift, "detection.drift", "period_shots", dm.period_shots);
  read(drift, "detection.drift", "phase", dm.phase);
  read(drift, "detection.drift", "random_walk_step", dm.random_walk_step);
  const Json& detect = object_at(j, "", "detect");
  read(detect, "detect", "points", c.detect.points);
  read(detect, "detect", "rabi_cycles", c.detect.rabi_cycles);
  read(detect, "detect", "photon_budget", c.detect.photon_budget);
  read(detect, "detect", "max_cycles", c.detect.max_cycles);
  read(object_at(j, "", "ionphoton"), "ionphoton", "heralds_per_basis",
       c.ionphoton.heralds_per_basis);
  const Json& cz = object_at(j, "", "cztransfer");
  read(cz, "cztransfer", "rsb_area_scale", c.cztransfer.cz.rsb_area_scale);
  read(cz, "cztransfer", "optical_phase_jitter_rad", c.cztransfer.cz.optical_phase_jitter_rad);
  read(cz, "cztransfer", "points", c.cztransfer.points);
  read(cz, "cztransfer", "rabi_cycles", c.cztransfer.rabi_cycles);
  read(cz, "cztransfer", "shots", c.cztransfer.shots);
  const Json& ms = object_at(j, "", "msgate");
  ms_from(ms, "msgate", c.msgate.ms);
  read(ms, "msgate", "phase_points", c.msgate.phase_points);
  const Json& ram = object_at(j, "", "ramsey");
  read_enum(ram, "ramsey", "qubit", c.ramsey.qubit, kQubit);
  read(ram, "ramsey", "points", c.ramsey.points);
  read(ram, "ramsey", "max_delay_t2", c.ramsey.max_delay_t2);
  read(ram, "ramsey", "phase_points", c.ramsey.options.phase_points);
  read(ram, "ramsey", "ba_illumination", c.ramsey.options.ba_illumination);
  const Json& net = object_at(j, "", "network");
  read(net, "network", "spec", c.network.spec_path);
  read(net, "network", "duration_s", c.network.duration_s);
  c.validate();
  return c;
}

Json default_tree() { return to_json(RunConfig{}); }

void merge_strict(Json& base, const Json& patch, const std::string& path) {
  if (!patch.is_object()) type_error(path.empty() ? "config" : path, "an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string where = join(path, it.key());
    auto target = base.find(it.key());
    if (target == base.end()) throw ConfigError(where + ": unknown key");
    if (target->is_object())
      merge_strict(*target, it.value(), where);
    else
      *target = it.value();
  }
}

void set_dotted(Json& tree, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("override has an empty key");
  Json* node = &tree;
  std::string path;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', pos);
    const std::string key = dotted_key.substr(pos, dot - pos);
    path = join(path, key);
    if (!node->is_object()) throw ConfigError(path + ": unknown key");
    auto it = node->find(key);
    if (it == node->end()) throw ConfigError(path + ": unknown key");
    node = &*it;
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  Json parsed = Json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  if (node->is_object()) {
    if (!parsed.is_object()) type_error(path, "an object");
    merge_strict(*node, parsed, path);
  } else {
    *node = parsed;
  }
}

Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    // Drop the library's "[json.exception...] " prefix.
    if (auto p = what.find("] "); p != std::string::npos) what = what.substr(p + 2);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                      what);
  }
}

std::string env_to_key(const std::string& name) {
  const std::string prefix = "QIONSIM_";
  if (name.rfind(prefix, 0) != 0) throw ConfigError(name + ": not a QIONSIM_ variable");
  std::string rest = name.substr(prefix.size());
  std::string out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (rest[i] == '_' && i + 1 < rest.size() && rest[i + 1] == '_') {
      out += '.';
      ++i;
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(rest[i])));
    }
  }
  return out;
}

std::map<std::string, std::string> qionsim_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry = *e;
    if (entry.rfind("QIONSIM_", 0) != 0) continue;
    const auto eq = entry.find('=');
    out[entry.substr(0, eq)] = eq == std::string::npos ? "" : entry.substr(eq + 1);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Loaded load(const std::string& path, const Overrides& overrides) {
  Loaded out;
  Json tree = default_tree();
  if (!path.empty()) {
    const Json file = parse_text(read_file(path), path);
    located(path, [&] { merge_strict(tree, file); });
    out.base_dir = std::filesystem::path(path).parent_path().string();
  }
  for (const auto& [name, value] : overrides.environment)
    located("environment " + name, [&] { set_dotted(tree, env_to_key(name), value); });
  for (const auto& kv : overrides.cli_sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set " + kv + ": expected key=value");
    located("--set", [&] { set_dotted(tree, kv.substr(0, eq), kv.substr(eq + 1)); });
  }
  out.config = from_json(tree);
  out.tree = to_json(out.config);
  return out;
}

namespace {

void check_keys(const Json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) type_error(where, "an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(join(where, it.key()) + ": unknown key");
  }
}

// Applies a partial override object onto a defaults tree, strictly.
template <typename T, typename ToJson, typename FromJson>
T overlay(const T& base, const Json& patch, const std::string& where, ToJson to, FromJson from) {
  Json tree = to(base);
  merge_strict(tree, patch, where);
  T out = base;
  from(tree, where, out);
  return out;
}

}  // namespace

nethost::NetworkSpec parse_network_spec(const Json& doc, const RunConfig& base) {
  check_keys(doc, "", {"schema_version", "bsa_switch", "swap_to_memory",
                       "checkpoint_interval_s", "nodes", "links", "memory_pairs"});
  nethost::NetworkSpec spec;
  read(doc, "", "schema_version", spec.schema_version);
  read_enum(doc, "", "bsa_switch", spec.bsa_switch, kSwitch);
  read(doc, "", "swap_to_memory", spec.swap_to_memory);
  read(doc, "", "checkpoint_interval_s", spec.checkpoint_interval_s);
  if (const Json* nodes = find(doc, "nodes")) {
    if (!nodes->is_array()) type_error("nodes", "a list");
    for (std::size_t i = 0; i < nodes->size(); ++i) {
      const Json& n = (*nodes)[i];
      const std::string w = "nodes[" + std::to_string(i) + "]";
      check_keys(n, w, {"id", "chain", "roles", "initially_shelved", "noise", "coherence",
                        "leakage", "ms"});
      nethost::NodeSpec node;
      node.model = base.node;
      node.noise = base.noise;
      node.coherence = base.coherence;
      node.leakage = base.leakage;
      node.ms = base.msgate.ms;
      read(n, w, "id", node.id);
      if (const Json* chain = find(n, "chain")) node.model.chain = chain_from(*chain, w + ".chain");
      if (const Json* roles = find(n, "roles")) {
        if (!roles->is_array()) type_error(w + ".roles", "a list");
        for (std::size_t k = 0; k < roles->size(); ++k) {
          const std::string rw = w + ".roles[" + std::to_string(k) + "]";
          if (!(*roles)[k].is_string()) type_error(rw, "a role name");
          located(rw, [&] { node.roles.push_back(nethost::role_from_string((*roles)[k])); });
        }
      } else {
        // Ba communicates, everything else stores.
        for (const auto& s : node.model.chain.ions)
          node.roles.push_back(s.name == crystal::ba138().name ? nethost::Role::communication
                                                               : nethost::Role::memory);
      }
      read(n, w, "initially_shelved", node.initially_shelved);
      if (const Json* p = find(n, "noise"))
        node.noise = overlay(node.noise, *p, w + ".noise", noise_json, noise_from);
      if (const Json* p = find(n, "coherence"))
        node.coherence = overlay(node.coherence, *p, w + ".coherence", coherence_json, coherence_from);
      if (const Json* p = find(n, "leakage"))
        node.leakage = overlay(node.leakage, *p, w + ".leakage", leakage_json, leakage_from);
      if (const Json* p = find(n, "ms"))
        node.ms = overlay(node.ms, *p, w + ".ms", ms_json, ms_from);
      spec.nodes.push_back(std::move(node));
    }
  }
  if (const Json* links = find(doc, "links")) {
    if (!links->is_array()) type_error("links", "a list");
    for (std::size_t i = 0; i < links->size(); ++i) {
      const Json& l = (*links)[i];
      const std::string w = "links[" + std::to_string(i) + "]";
      check_keys(l, w, {"endpoints", "attempt_period_s", "herald_latency_s", "bsa_visibility",
                        "photon", "photon_a", "photon_b"});
      nethost::LinkSpec link;
      const Json* ends = find(l, "endpoints");
      if (!ends || !ends->is_array() || ends->size() != 2 || !(*ends)[0].is_string() ||
          !(*ends)[1].is_string())
        type_error(w + ".endpoints", "a pair of node ids");
      link.node_a = (*ends)[0].get<std::string>();
      link.node_b = (*ends)[1].get<std::string>();
      read(l, w, "attempt_period_s", link.attempt_period_s);
      read(l, w, "herald_latency_s", link.herald_latency_s);
      read(l, w, "bsa_visibility", link.bsa_visibility);
      auto photon = base.photon;
      if (const Json* p = find(l, "photon"))
        photon = overlay(photon, *p, w + ".photon", photon_json, photon_from);
      link.photon_a = link.photon_b = photon;
      if (const Json* p = find(l, "photon_a"))
        link.photon_a = overlay(photon, *p, w + ".photon_a", photon_json, photon_from);
      if (const Json* p = find(l, "photon_b"))
        link.photon_b = overlay(photon, *p, w + ".photon_b", photon_json, photon_from);
      spec.links.push_back(std::move(link));
    }
  }
  if (const Json* pairs = find(doc, "memory_pairs")) {
    if (!pairs->is_array()) type_error("memory_pairs", "a list");
    for (std::size_t i = 0; i < pairs->size(); ++i) {
      const Json& p = (*pairs)[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
        type_error("memory_pairs[" + std::to_string(i) + "]", "a pair of node ids");
      spec.memory_pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
  }
  spec.validate();
  return spec;
}

nethost::NetworkSpec load_network_spec(const std::string& path, const RunConfig& base) {
  const Json doc = parse_text(read_file(path), path);
  nethost::NetworkSpec spec;
  located(path, [&] { spec = parse_network_spec(doc, base); });
  return spec;
}

Json network_spec_to_json(const nethost::NetworkSpec& spec) {
  Json j;
  j["schema_version"] = spec.schema_version;
  j["bsa_switch"] = enum_name(spec.bsa_switch, kSwitch);
  j["swap_to_memory"] = spec.swap_to_memory;
  j["checkpoint_interval_s"] = spec.checkpoint_interval_s;
  j["nodes"] = Json::array();
  for (const auto& n : spec.nodes) {
    Json roles = Json::array();
    for (auto r : n.roles) roles.push_back(nethost::to_string(r));
    j["nodes"].push_back(Json{{"id", n.id},
                              {"chain", chain_json(n.model.chain)},
                              {"roles", roles},
                              {"initially_shelved", n.initially_shelved},
                              {"noise", noise_json(n.noise)},
                              {"coherence", coherence_json(n.coherence)},
                              {"leakage", leakage_json(n.leakage)},
                              {"ms", ms_json(n.ms)}});
  }
  j["links"] = Json::array();
  for (const auto& l : spec.links)
    j["links"].push_back(Json{{"endpoints", {l.node_a, l.node_b}},
                              {"attempt_period_s", l.attempt_period_s},
                              {"herald_latency_s", l.herald_latency_s},
                              {"bsa_visibility", l.bsa_visibility},
                              {"photon_a", photon_json(l.photon_a)},
                              {"photon_b", photon_json(l.photon_b)}});
  j["memory_pairs"] = Json::array();
  for (const auto& [a, b] : spec.memory_pairs) j["memory_pairs"].push_back({a, b});
  return j;
}

}  // namespace qionsim::config
