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

#include "qionsim/nethost.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <thread>

namespace qionsim::nethost {

using qsim::Complex;
using qsim::Matrix;

std::string to_string(Role r) {
  return r == Role::communication ? "communication" : "memory";
}

Role role_from_string(const std::string& s) {
  if (s == "communication") return Role::communication;
  if (s == "memory") return Role::memory;
  throw ConfigError("unknown role '" + s + "' (expected communication or memory)");
}

std::vector<std::size_t> NodeSpec::ions_with(Role r) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < roles.size(); ++i)
    if (roles[i] == r) out.push_back(i);
  return out;
}

namespace {

std::string at(const std::string& prefix, std::size_t i) {
  return prefix + "[" + std::to_string(i) + "]";
}

// Rethrows a validation failure with the field location prepended.
template <typename F>
void located(const std::string& where, F&& check) {
  try {
    check();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

struct IonRef {
  std::size_t node = 0;
  std::size_t ion = 0;
};

// Communication ion used by each link endpoint. With a dedicated analyzer
// every link needs its own ions; with the shared one links take turns, so
// endpoints are spread over the available ions.
std::vector<std::array<IonRef, 2>> assign_comm_ions(const NetworkSpec& spec) {
  std::vector<std::size_t> next(spec.nodes.size(), 0);
  std::vector<std::array<IonRef, 2>> out;
  for (std::size_t l = 0; l < spec.links.size(); ++l) {
    const auto& link = spec.links[l];
    std::array<IonRef, 2> ends;
    const std::array<const std::string*, 2> ids{&link.node_a, &link.node_b};
    for (int s = 0; s < 2; ++s) {
      const std::size_t n = spec.node_index(*ids[s]);
      const auto comm = spec.nodes[n].ions_with(Role::communication);
      std::size_t k = next[n]++;
      if (spec.bsa_switch == BsaSwitch::dedicated) {
        if (k >= comm.size())
          throw ConfigError(at("links", l) + ".endpoints: node '" + *ids[s] +
                            "' has no free communication ion for a dedicated analyzer");
      } else {
        k %= comm.size();
      }
      ends[s] = {n, comm[k]};
    }
    out.push_back(ends);
  }
  return out;
}

}  // namespace

std::size_t NetworkSpec::node_index(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  throw ConfigError("unknown node '" + id + "'");
}

void NetworkSpec::validate() const {
  if (schema_version != kSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(schema_version));
  std::set<std::string> ids;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    const std::string where = at("nodes", i);
    if (n.id.empty()) throw ConfigError(where + ".id: must be non-empty");
    if (!ids.insert(n.id).second)
      throw ConfigError(where + ".id: duplicate id '" + n.id + "'");
    located(where + ".chain", [&] { n.model.validate(); });
    located(where + ".noise", [&] { n.noise.validate(); });
    located(where + ".coherence", [&] { n.coherence.validate(); });
    located(where + ".leakage", [&] { n.leakage.validate(); });
    located(where + ".ms", [&] { n.ms.validate(); });
    if (n.roles.size() != n.model.chain.size())
      throw ConfigError(where + ".roles: expected " + std::to_string(n.model.chain.size()) +
                        " entries, one per ion");
    for (std::size_t j = 0; j < n.roles.size(); ++j) {
      const auto& sp = n.model.chain.ions[j];
      if (n.roles[j] == Role::communication && sp.name != crystal::ba138().name)
        throw ConfigError(at(where + ".roles", j) + ": communication ion must be " +
                          crystal::ba138().name);
      if (n.roles[j] == Role::memory && sp.name != crystal::yb171().name)
        throw ConfigError(at(where + ".roles", j) + ": memory ion must be " +
                          crystal::yb171().name);
    }
    if (n.ions_with(Role::communication).empty() || n.ions_with(Role::memory).empty())
      throw ConfigError(where + ".roles: needs at least one communication and one memory ion");
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto& l = links[i];
    const std::string where = at("links", i);
    for (const auto* id : {&l.node_a, &l.node_b})
      if (!ids.count(*id)) throw ConfigError(where + ".endpoints: unknown node '" + *id + "'");
    if (l.node_a == l.node_b) throw ConfigError(where + ".endpoints: endpoints must be distinct");
    if (!(l.attempt_period_s > 0.0 && std::isfinite(l.attempt_period_s)))
      throw ConfigError(where + ".attempt_period_s: must be > 0");
    if (!(l.herald_latency_s >= 0.0 && std::isfinite(l.herald_latency_s)))
      throw ConfigError(where + ".herald_latency_s: must be >= 0");
    located(where + ".photon_a", [&] { l.photon_a.validate(); });
    located(where + ".photon_b", [&] { l.photon_b.validate(); });
    if (!(l.bsa_visibility >= 0.0 && l.bsa_visibility <= 1.0))
      throw ConfigError(where + ".bsa_visibility: must lie in [0, 1]");
  }
  if (!(checkpoint_interval_s >= 0.0))
    throw ConfigError("checkpoint_interval_s: must be >= 0");
  std::vector<std::size_t> used(nodes.size(), 0);
  for (std::size_t i = 0; i < memory_pairs.size(); ++i) {
    const auto& [a, b] = memory_pairs[i];
    const std::string where = at("memory_pairs", i);
    for (const auto* id : {&a, &b}) {
      if (!ids.count(*id)) throw ConfigError(where + ": unknown node '" + *id + "'");
      const std::size_t n = node_index(*id);
      if (++used[n] > nodes[n].ions_with(Role::memory).size())
        throw ConfigError(where + ": node '" + *id + "' has no free memory ion");
    }
    if (a == b) throw ConfigError(where + ": endpoints must be distinct");
  }
  assign_comm_ions(*this);
}

double link_success_probability(const LinkSpec& link) {
  const auto d = photonics::bell_state_analyzer(photonics::heralded_state(link.photon_a),
                                                photonics::heralded_state(link.photon_b),
                                                link.bsa_visibility);
  return link.photon_a.success_probability() * link.photon_b.success_probability() *
         (d.p_psi_plus + d.p_psi_minus);
}

Json to_json(const Event& e) {
  Json j;
  j["t"] = e.time_s;
  j["kind"] = e.kind;
  j["payload"] = e.payload;
  return j;
}

Event event_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("t") || !j.contains("kind"))
    throw ConfigError("event record needs 't' and 'kind'");
  Event e;
  e.time_s = j.at("t").get<double>();
  e.kind = j.at("kind").get<std::string>();
  if (j.contains("payload")) e.payload = j.at("payload");
  return e;
}

std::string to_jsonl(const EventLog& log) {
  std::string out;
  for (const auto& e : log) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

EventLog parse_jsonl(const std::string& text) {
  EventLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      log.push_back(event_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw ConfigError("event log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

qsim::Matrix apply_to_side(const Matrix& pair_rho, const Matrix& superop, int side) {
  if (pair_rho.rows() != 4 || pair_rho.cols() != 4 || superop.rows() != 4 ||
      superop.cols() != 4)
    throw DimensionError("apply_to_side expects a 4x4 pair state and 4x4 superoperator");
  if (side != 0 && side != 1) throw ConfigError("side must be 0 or 1");
  Matrix out = Matrix::Zero(4, 4);
  // Pair index = 2 * a + b.
  auto idx = [side](int mine, int other) { return side == 0 ? 2 * mine + other : 2 * other + mine; };
  for (int o = 0; o < 2; ++o)
    for (int op = 0; op < 2; ++op)
      for (int i = 0; i < 2; ++i)
        for (int ip = 0; ip < 2; ++ip) {
          Complex acc = 0.0;
          for (int c = 0; c < 2; ++c)
            for (int cp = 0; cp < 2; ++cp)
              acc += superop(2 * i + ip, 2 * c + cp) * pair_rho(idx(c, o), idx(cp, op));
          out(idx(i, o), idx(ip, op)) = acc;
        }
  return out;
}

qsim::Matrix swap_superoperator(const NodeSpec& node) {
  const auto prep = protocols::prepare(node.model, 0.0);
  const auto params = node.ms.params(node.model);
  const std::size_t ba = node.model.ba_index();
  const std::size_t yb = node.model.yb_index();
  const double r = 1.0 / std::sqrt(2.0);
  const Complex i1(0.0, 1.0);
  // Preparations of |0>, |1>, |+>, |+i> on the Ba qubit. The integrator only
  // accepts physical states, so off-diagonal inputs are rebuilt afterwards.
  Matrix u_plus(2, 2), u_i(2, 2);
  u_plus << r, -r, r, r;
  u_i << r, i1 * r, i1 * r, r;
  const std::array<Matrix, 4> preps{Matrix::Identity(2, 2), qsim::ops::sigma_x(), u_plus, u_i};
  std::array<Matrix, 4> m;
  for (int k = 0; k < 4; ++k) {
    gates::NodeState s = prep.node;
    s.state = qsim::apply_unitary(s.state, preps[k], {s.qubit(ba)});
    s = gates::ms_swap(std::move(s), params, node.noise);
    auto q = qsim::partial_trace(s.state, {s.qubit(yb)});
    m[k] = qsim::apply_unitary(q, gates::ms_swap_correction(), {0}).rho();
  }
  const Matrix diag = 0.5 * (m[0] + m[1]);
  const Matrix e01 = (m[2] - diag) + i1 * (m[3] - diag);
  const Matrix e10 = (m[2] - diag) - i1 * (m[3] - diag);
  const std::array<const Matrix*, 4> images{&m[0], &e01, &e10, &m[1]};
  Matrix superop(4, 4);
  for (int col = 0; col < 4; ++col)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) superop(2 * a + b, col) = (*images[col])(a, b);
  return superop;
}

namespace {

// Scales the coherences of one side of a pair state.
void dephase_side(Matrix& rho, int side, double factor) {
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const int bi = side == 0 ? i >> 1 : i & 1;
      const int bj = side == 0 ? j >> 1 : j & 1;
      if (bi != bj) rho(i, j) *= factor;
    }
}

double psi_plus_fidelity(const Matrix& rho) {
  const qsim::Vector v = photonics::psi_plus();
  return (v.adjoint() * rho * v)(0, 0).real();
}

// Everything swap_superoperator depends on.
std::string physics_key(const NodeSpec& n) {
  std::ostringstream k;
  k.precision(17);
  const auto& m = n.model;
  for (const auto& ion : m.chain.ions) k << ion.name << ' ' << ion.mass_amu << ' ' << ion.charge << ';';
  k << m.trap.axial_freq_hz << ' ' << m.trap.transverse_freq_x_hz << ' '
    << m.trap.transverse_freq_y_hz << ' ' << m.trap.reference_species.name << ';'
    << m.eit.target_nbar_op << ' ' << m.eit.target_nbar_ip << ';' << m.raman.ba_rabi_hz << ' '
    << m.raman.yb_rabi_hz << ' ' << m.raman.ba_wavelength_m << ' ' << m.raman.yb_wavelength_m
    << ' ' << m.raman.beam_angle_rad << ';' << crystal::to_string(m.mode.direction) << ' '
    << m.mode.label << ' ' << m.n_max << ';' << n.noise.heating_rate_per_ms << ' '
    << n.noise.spam_error << ' ' << n.noise.scatter_per_rabi_cycle << ' '
    << static_cast<int>(n.noise.crosstalk.mode) << ' ' << n.noise.crosstalk.ratio_532_on_yb
    << ' ' << n.noise.crosstalk.ratio_355_on_ba << ' ' << n.noise.crosstalk.suppressed_ratio
    << ';' << n.ms.gate_time_s << ' ' << n.ms.force_phase << ' ' << n.ms.ba_analysis_phase;
  return k.str();
}

struct Pair {
  int id = 0;
  int link = -1;  // -1 for preloaded memory pairs
  std::array<IonRef, 2> sides;
  Matrix rho;
  double created_s = 0.0;
  double updated_s = 0.0;
  bool in_memory = false;
};

struct IonRuntime {
  bool shelved = false;
  bool busy = false;  // attempting, waiting for a herald or being swapped
  int pair = -1;
};

enum class EvType { batch_end, herald, swap, recover, checkpoint };

struct QueueItem {
  double t = 0.0;
  std::uint64_t seq = 0;
  EvType type = EvType::batch_end;
  std::size_t index = 0;  // link index or node index
  std::size_t ion = 0;
  int pair = -1;
  bool operator>(const QueueItem& o) const {
    return t != o.t ? t > o.t : seq > o.seq;
  }
};

struct LinkRuntime {
  std::array<IonRef, 2> ends;
  double p = 0.0;
  double p_plus_share = 0.5;
  Matrix rho_plus;
  Matrix rho_minus;  // already rotated into the psi+ frame
  std::array<double, 2> leak_q{0.0, 0.0};
  Rng rng;
  // Batch in flight.
  double start_s = 0.0;
  std::uint64_t attempts = 0;
  std::string outcome;
  int leak_side = -1;
  double emitted_s = 0.0;
};

class Simulation {
 public:
  Simulation(const NetworkSpec& spec, double duration_s, std::uint64_t seed)
      : spec_(spec), duration_(duration_s), seed_(seed) {
    spec_.validate();
    if (!(duration_s >= 0.0 && std::isfinite(duration_s)))
      throw ConfigError("duration must be a finite value >= 0");
    ions_.resize(spec_.nodes.size());
    for (std::size_t n = 0; n < spec_.nodes.size(); ++n) {
      const auto& node = spec_.nodes[n];
      ions_[n].resize(node.model.chain.size());
      leak_nodes_.push_back(gates::make_node(node.model.chain.ions, {}));
      for (std::size_t i = 0; i < node.model.chain.size(); ++i)
        leak_rng_.emplace(key(n, i), Rng::stream(seed, "node/" + node.id + "/leak", i));
    }
    const auto ends = assign_comm_ions(spec_);
    for (std::size_t l = 0; l < spec_.links.size(); ++l) {
      const auto& link = spec_.links[l];
      const auto d = photonics::bell_state_analyzer(photonics::heralded_state(link.photon_a),
                                                    photonics::heralded_state(link.photon_b),
                                                    link.bsa_visibility);
      LinkRuntime rt{ends[l], 0.0, 0.5, d.atoms_psi_plus.rho(), d.atoms_psi_minus.rho(),
                     {0.0, 0.0}, Rng::stream(seed, "link/" + link.node_a + "/" + link.node_b, l),
                     0.0, 0, "", -1, 0.0};
      const double ph = d.p_psi_plus + d.p_psi_minus;
      rt.p = link.photon_a.success_probability() * link.photon_b.success_probability() * ph;
      if (ph > 0.0) rt.p_plus_share = d.p_psi_plus / ph;
      // psi- becomes psi+ after Z on the second atom.
      Matrix z = Matrix::Identity(4, 4);
      z(1, 1) = z(3, 3) = -1.0;
      rt.rho_minus = z * rt.rho_minus * z;
      const std::array<const photonics::PhotonCollectionConfig*, 2> ph_cfg{&link.photon_a,
                                                                           &link.photon_b};
      for (int s = 0; s < 2; ++s)
        rt.leak_q[s] = ph_cfg[s]->excitation_prob *
                       spec_.nodes[rt.ends[s].node].leakage.shelve_prob_per_scatter;
      links_.push_back(std::move(rt));
    }
    if (spec_.swap_to_memory) {
      std::set<std::size_t> needed;
      for (const auto& l : links_)
        for (const auto& e : l.ends) needed.insert(e.node);
      // Nodes that differ only in bookkeeping share one channel.
      std::map<std::string, Matrix> by_physics;
      for (std::size_t n : needed) {
        const std::string k = physics_key(spec_.nodes[n]);
        auto it = by_physics.find(k);
        if (it == by_physics.end())
          it = by_physics.emplace(k, swap_superoperator(spec_.nodes[n])).first;
        swap_maps_.emplace(n, it->second);
      }
    }
  }

  EventLog run() {
    for (std::size_t n = 0; n < spec_.nodes.size(); ++n) {
      if (!spec_.nodes[n].initially_shelved) continue;
      for (std::size_t ion : spec_.nodes[n].ions_with(Role::communication)) {
        Json payload{{"node", spec_.nodes[n].id}, {"ion", ion}, {"cause", "initial"}};
        shelve(n, ion, 0.0, std::move(payload));
      }
    }
    for (const auto& [a, b] : spec_.memory_pairs) preload(a, b);
    if (spec_.checkpoint_interval_s > 0.0 && spec_.checkpoint_interval_s < duration_)
      push({spec_.checkpoint_interval_s, 0, EvType::checkpoint, 1, 0, -1});
    dispatch(0.0);
    while (!queue_.empty() && queue_.top().t <= duration_) {
      const QueueItem it = queue_.top();
      queue_.pop();
      switch (it.type) {
        case EvType::batch_end: on_batch_end(it); break;
        case EvType::herald: on_herald(it); break;
        case EvType::swap: on_swap(it); break;
        case EvType::recover: on_recover(it); break;
        case EvType::checkpoint: on_checkpoint(it); break;
      }
      check_registry();
    }
    if (std::any_of(pairs_.begin(), pairs_.end(), [](const auto& kv) { return kv.second.in_memory; }))
      checkpoint(duration_, true);
    return std::move(log_);
  }

 private:
  static std::uint64_t key(std::size_t node, std::size_t ion) {
    return (static_cast<std::uint64_t>(node) << 32) | ion;
  }
  IonRuntime& ion(const IonRef& r) { return ions_[r.node][r.ion]; }

  void push(QueueItem it) {
    it.seq = seq_++;
    queue_.push(it);
  }
  void emit(double t, const char* kind, Json payload) {
    log_.push_back({t, kind, std::move(payload)});
  }

  bool ready(std::size_t l) {
    for (const auto& e : links_[l].ends) {
      const auto& s = ion(e);
      if (s.shelved || s.busy || s.pair >= 0) return false;
    }
    return true;
  }

  void dispatch(double t) {
    if (links_.empty()) return;
    if (spec_.bsa_switch == BsaSwitch::dedicated) {
      for (std::size_t l = 0; l < links_.size(); ++l)
        if (ready(l)) start_batch(l, t);
      return;
    }
    if (bsa_owner_) return;
    for (std::size_t j = 0; j < links_.size(); ++j) {
      const std::size_t l = (token_ + j) % links_.size();
      if (!ready(l)) continue;
      bsa_owner_ = l;
      token_ = (l + 1) % links_.size();
      start_batch(l, t);
      return;
    }
  }

  void release_bsa(std::size_t l) {
    if (bsa_owner_ && *bsa_owner_ == l) bsa_owner_.reset();
  }

  void start_batch(std::size_t l, double t) {
    auto& rt = links_[l];
    const double period = spec_.links[l].attempt_period_s;
    for (const auto& e : rt.ends) ion(e).busy = true;
    constexpr auto never = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t k_success = rt.p > 0.0 ? rt.rng.geometric_trials(rt.p) : never;
    std::uint64_t k = k_success;
    rt.outcome = "herald";
    rt.leak_side = -1;
    for (int s = 0; s < 2; ++s) {
      if (rt.leak_q[s] <= 0.0) continue;
      const std::uint64_t k_leak = leak_rng_.at(key(rt.ends[s].node, rt.ends[s].ion))
                                       .geometric_trials(rt.leak_q[s]);
      // A shelved ion emits no photon, so a leak on the same attempt wins.
      if (k_leak <= k) {
        k = k_leak;
        rt.outcome = "leak";
        rt.leak_side = s;
      }
    }
    rt.start_s = t;
    const double end = t + static_cast<double>(k) * period;
    if (k == never || end > duration_) {
      // Batch starts accumulate rounding; do not lose the last whole attempt.
      rt.attempts = static_cast<std::uint64_t>(std::floor((duration_ - t) / period + 1e-9));
      rt.outcome = "deadline";
      push({duration_, 0, EvType::batch_end, l, 0, -1});
      return;
    }
    rt.attempts = k;
    push({end, 0, EvType::batch_end, l, 0, -1});
  }

  void on_batch_end(const QueueItem& it) {
    auto& rt = links_[it.index];
    const auto& link = spec_.links[it.index];
    emit(it.t, "attempt",
         Json{{"link", it.index},
              {"endpoints", {link.node_a, link.node_b}},
              {"attempts", rt.attempts},
              {"start_s", rt.start_s},
              {"outcome", rt.outcome}});
    if (rt.outcome == "deadline") return;
    if (rt.outcome == "herald") {
      rt.emitted_s = it.t;
      push({it.t + link.herald_latency_s, 0, EvType::herald, it.index, 0, -1});
      return;
    }
    for (const auto& e : rt.ends) ion(e).busy = false;
    const IonRef& leaked = rt.ends[static_cast<std::size_t>(rt.leak_side)];
    shelve(leaked.node, leaked.ion, it.t,
           Json{{"node", spec_.nodes[leaked.node].id},
                {"ion", leaked.ion},
                {"cause", "attempt"},
                {"link", it.index}});
    release_bsa(it.index);
    dispatch(it.t);
  }

  void shelve(std::size_t n, std::size_t ion_index, double t, Json payload) {
    ions_[n][ion_index].shelved = true;
    emit(t, "leak", std::move(payload));
    auto& scratch = leak_nodes_[n];
    scratch.available[ion_index] = false;
    const auto out = protocols::leakage_step(scratch, ion_index, {}, t, t,
                                             spec_.nodes[n].leakage,
                                             leak_rng_.at(key(n, ion_index)));
    scratch.available[ion_index] = true;
    const double back = out.pending_recovery_s ? *out.pending_recovery_s : t;
    push({back, 0, EvType::recover, n, ion_index, -1});
  }

  void on_recover(const QueueItem& it) {
    ions_[it.index][it.ion].shelved = false;
    emit(it.t, "recover", Json{{"node", spec_.nodes[it.index].id}, {"ion", it.ion}});
    dispatch(it.t);
  }

  void on_herald(const QueueItem& it) {
    auto& rt = links_[it.index];
    const auto& link = spec_.links[it.index];
    const bool plus = rt.rng.uniform() < rt.p_plus_share;
    Pair p;
    p.id = next_pair_++;
    p.link = static_cast<int>(it.index);
    p.sides = rt.ends;
    p.rho = plus ? rt.rho_plus : rt.rho_minus;
    p.created_s = p.updated_s = it.t;
    // Ba coherence lost while the herald travels.
    for (int s = 0; s < 2; ++s)
      dephase_side(p.rho, s,
                   protocols::coherence_factor(protocols::Qubit::ba, it.t - rt.emitted_s,
                                               spec_.nodes[p.sides[s].node].coherence));
    const double fid = psi_plus_fidelity(p.rho);
    emit(it.t, "herald",
         Json{{"link", it.index},
              {"endpoints", {link.node_a, link.node_b}},
              {"pair", p.id},
              {"bsa", plus ? "psi+" : "psi-"},
              {"emitted_s", rt.emitted_s},
              {"fidelity", fid}});
    release_bsa(it.index);
    if (spec_.swap_to_memory) {
      for (const auto& e : p.sides) ion(e).pair = p.id;
      double wait = 0.0;
      for (const auto& e : p.sides)
        wait = std::max(wait, 2.0 * spec_.nodes[e.node].ms.gate_time_s);
      push({it.t + wait, 0, EvType::swap, it.index, 0, p.id});
      pairs_.emplace(p.id, std::move(p));
    } else {
      // Consumed at the herald.
      for (const auto& e : p.sides) ion(e).busy = false;
    }
    dispatch(it.t);
  }

  void update_memory(Pair& p, double t) {
    if (!p.in_memory || t <= p.updated_s) return;
    for (int s = 0; s < 2; ++s)
      dephase_side(p.rho, s,
                   protocols::coherence_factor(protocols::Qubit::yb, t - p.updated_s,
                                               spec_.nodes[p.sides[s].node].coherence));
    p.updated_s = t;
  }

  void release(Pair& p) {
    for (const auto& e : p.sides) {
      auto& s = ion(e);
      s.pair = -1;
      s.busy = false;
    }
  }

  // First free memory ion of the node; evicts the oldest stored pair if none.
  std::size_t memory_slot(std::size_t n, Json& evicted) {
    const auto mem = spec_.nodes[n].ions_with(Role::memory);
    for (std::size_t i : mem)
      if (ions_[n][i].pair < 0) return i;
    int oldest = -1;
    for (std::size_t i : mem) {
      const int id = ions_[n][i].pair;
      if (oldest < 0 || pairs_.at(id).created_s < pairs_.at(oldest).created_s ||
          (pairs_.at(id).created_s == pairs_.at(oldest).created_s && id < oldest))
        oldest = id;
    }
    Pair& victim = pairs_.at(oldest);
    std::size_t freed = 0;
    for (const auto& e : victim.sides)
      if (e.node == n) freed = e.ion;
    release(victim);
    evicted.push_back(oldest);
    pairs_.erase(oldest);
    return freed;
  }

  void on_swap(const QueueItem& it) {
    Pair& p = pairs_.at(it.pair);
    const double before = psi_plus_fidelity(p.rho);
    Json evicted = Json::array();
    Json memory = Json::array();
    std::array<IonRef, 2> targets;
    for (int s = 0; s < 2; ++s) {
      const std::size_t n = p.sides[s].node;
      targets[s] = {n, memory_slot(n, evicted)};
      // Reserve before the other side looks for a slot on the same node.
      ion(targets[s]).pair = p.id;
      p.rho = apply_to_side(p.rho, swap_maps_.at(n), s);
      memory.push_back(Json{{"node", spec_.nodes[n].id}, {"ion", targets[s].ion}});
    }
    for (const auto& e : p.sides) {
      auto& s = ion(e);
      s.pair = -1;
      s.busy = false;
    }
    p.sides = targets;
    p.in_memory = true;
    p.updated_s = it.t;
    emit(it.t, "swap",
         Json{{"link", it.index},
              {"pair", p.id},
              {"memory", memory},
              {"fidelity_before", before},
              {"fidelity_after", psi_plus_fidelity(p.rho)},
              {"evicted", evicted}});
    dispatch(it.t);
  }

  void checkpoint(double t, bool final) {
    Json entries = Json::array();
    for (auto& [id, p] : pairs_) {
      if (!p.in_memory) continue;
      update_memory(p, t);
      entries.push_back(Json{{"pair", id},
                             {"nodes", {spec_.nodes[p.sides[0].node].id,
                                        spec_.nodes[p.sides[1].node].id}},
                             {"fidelity", psi_plus_fidelity(p.rho)}});
    }
    emit(t, "decohere-checkpoint", Json{{"final", final}, {"pairs", entries}});
  }

  void on_checkpoint(const QueueItem& it) {
    checkpoint(it.t, false);
    const std::size_t k = it.index + 1;
    const double next = static_cast<double>(k) * spec_.checkpoint_interval_s;
    if (next < duration_) push({next, 0, EvType::checkpoint, k, 0, -1});
  }

  void preload(const std::string& a, const std::string& b) {
    Pair p;
    p.id = next_pair_++;
    Json dummy = Json::array();
    const std::array<std::size_t, 2> nodes{spec_.node_index(a), spec_.node_index(b)};
    for (int s = 0; s < 2; ++s) {
      p.sides[s] = {nodes[s], memory_slot(nodes[s], dummy)};
      ion(p.sides[s]).pair = p.id;
    }
    const qsim::Vector v = photonics::psi_plus();
    p.rho = v * v.adjoint();
    p.in_memory = true;
    pairs_.emplace(p.id, std::move(p));
  }

  // Each ion is claimed by at most one pair, and pairs point back at it.
  void check_registry() const {
    std::map<std::uint64_t, int> owner;
    for (const auto& [id, p] : pairs_)
      for (const auto& e : p.sides) {
        if (!owner.emplace(key(e.node, e.ion), id).second)
          throw Error("entanglement registry: ion claimed by two pairs");
        if (ions_[e.node][e.ion].pair != id)
          throw Error("entanglement registry: ion does not point back at its pair");
      }
    for (std::size_t n = 0; n < ions_.size(); ++n)
      for (std::size_t i = 0; i < ions_[n].size(); ++i)
        if (ions_[n][i].pair >= 0 && !owner.count(key(n, i)))
          throw Error("entanglement registry: ion points at an unregistered pair");
  }

  NetworkSpec spec_;
  double duration_;
  std::uint64_t seed_;
  std::vector<std::vector<IonRuntime>> ions_;
  std::vector<gates::NodeState> leak_nodes_;
  std::map<std::uint64_t, Rng> leak_rng_;
  std::vector<LinkRuntime> links_;
  std::map<std::size_t, Matrix> swap_maps_;
  std::map<int, Pair> pairs_;
  int next_pair_ = 0;
  std::optional<std::size_t> bsa_owner_;
  std::size_t token_ = 0;
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  EventLog log_;
};

Json link_block(const NetworkSpec& spec, std::size_t l, double total_time_s,
                std::uint64_t attempts, double active_s, std::uint64_t heralds,
                double fidelity_sum) {
  const auto& link = spec.links[l];
  const double p = link_success_probability(link);
  const double rate = total_time_s > 0.0 ? heralds / total_time_s : 0.0;
  const double se = total_time_s > 0.0 ? std::sqrt(static_cast<double>(heralds)) / total_time_s : 0.0;
  Json j;
  j["endpoints"] = {link.node_a, link.node_b};
  j["attempt_period_s"] = link.attempt_period_s;
  j["success_probability"] = p;
  j["expected_rate_hz"] = p / link.attempt_period_s;
  j["attempts"] = attempts;
  j["active_time_s"] = active_s;
  j["heralds"] = heralds;
  j["rate_hz"] = rate;
  j["rate_stderr_hz"] = se;
  j["rate_ci95_hz"] = {std::max(0.0, rate - 1.96 * se), rate + 1.96 * se};
  j["success_fraction"] = attempts ? static_cast<double>(heralds) / attempts : 0.0;
  j["mean_herald_fidelity"] = heralds ? Json(fidelity_sum / heralds) : Json(nullptr);
  return j;
}

Json metadata(const NetworkSpec& spec) {
  Json placeholders = Json::array();
  for (std::size_t l = 0; l < spec.links.size(); ++l) {
    placeholders.push_back(at("links", l) + ".attempt_period_s");
    placeholders.push_back(at("links", l) + ".herald_latency_s");
  }
  return Json{{"placeholders", placeholders},
              {"note", "attempt periods and herald latencies are order-of-magnitude "
                       "placeholders, not measured values"}};
}

}  // namespace

SimulationResult simulate(const NetworkSpec& spec, double duration_s, std::uint64_t seed) {
  SimulationResult r;
  r.log = Simulation(spec, duration_s, seed).run();
  r.summary = summarize(spec, duration_s, seed, r.log);
  return r;
}

Json summarize(const NetworkSpec& spec, double duration_s, std::uint64_t seed,
               const EventLog& log) {
  const std::size_t nl = spec.links.size();
  std::vector<std::uint64_t> attempts(nl, 0), heralds(nl, 0);
  std::vector<double> active(nl, 0.0), fid(nl, 0.0);
  std::map<std::pair<std::string, std::uint64_t>, double> dark_since;
  std::map<std::string, double> dark_time;
  std::map<std::string, std::uint64_t> leaks;
  std::uint64_t swaps = 0, evictions = 0;
  double swap_fid = 0.0;
  Json memory = Json::array();
  double last_t = 0.0;
  for (const auto& e : log) {
    if (e.time_s < last_t) throw ConfigError("event log times must be non-decreasing");
    last_t = e.time_s;
    const auto& p = e.payload;
    if (e.kind == "attempt") {
      const auto l = p.at("link").get<std::size_t>();
      if (l >= nl) throw ConfigError("event log refers to an unknown link");
      attempts[l] += p.at("attempts").get<std::uint64_t>();
      active[l] += e.time_s - p.at("start_s").get<double>();
    } else if (e.kind == "herald") {
      const auto l = p.at("link").get<std::size_t>();
      if (l >= nl) throw ConfigError("event log refers to an unknown link");
      ++heralds[l];
      fid[l] += p.at("fidelity").get<double>();
    } else if (e.kind == "leak") {
      const auto node = p.at("node").get<std::string>();
      dark_since[{node, p.at("ion").get<std::uint64_t>()}] = e.time_s;
      ++leaks[node];
    } else if (e.kind == "recover") {
      const auto node = p.at("node").get<std::string>();
      auto it = dark_since.find({node, p.at("ion").get<std::uint64_t>()});
      if (it != dark_since.end()) {
        dark_time[node] += e.time_s - it->second;
        dark_since.erase(it);
      }
    } else if (e.kind == "swap") {
      ++swaps;
      swap_fid += p.at("fidelity_after").get<double>();
      evictions += p.at("evicted").size();
    } else if (e.kind == "decohere-checkpoint") {
      memory = Json{{"time_s", e.time_s}, {"pairs", p.at("pairs")}};
    } else {
      throw ConfigError("event log: unknown kind '" + e.kind + "'");
    }
  }
  for (const auto& [k, since] : dark_since) dark_time[k.first] += duration_s - since;

  Json s;
  s["schema_version"] = kSchemaVersion;
  s["seed"] = seed;
  s["duration_s"] = duration_s;
  s["events"] = log.size();
  s["links"] = Json::array();
  for (std::size_t l = 0; l < nl; ++l)
    s["links"].push_back(link_block(spec, l, duration_s, attempts[l], active[l], heralds[l], fid[l]));
  s["nodes"] = Json::array();
  for (const auto& node : spec.nodes) {
    const double comm = static_cast<double>(node.ions_with(Role::communication).size());
    const double dark = dark_time.count(node.id) ? dark_time[node.id] : 0.0;
    s["nodes"].push_back(
        Json{{"id", node.id},
             {"communication_availability",
              duration_s > 0.0 ? 1.0 - dark / (comm * duration_s) : 1.0},
             {"leaks", leaks.count(node.id) ? leaks[node.id] : 0}});
  }
  s["swaps"] = Json{{"count", swaps},
                    {"mean_fidelity_after", swaps ? Json(swap_fid / swaps) : Json(nullptr)},
                    {"evictions", evictions}};
  s["memory"] = memory.is_null() ? Json::object() : memory;
  s["metadata"] = metadata(spec);
  return s;
}

std::vector<SimulationResult> simulate_replicas(const NetworkSpec& spec, double duration_s,
                                                std::uint64_t seed, std::size_t replicas,
                                                std::size_t threads) {
  spec.validate();
  std::vector<SimulationResult> out(replicas);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(replicas, 1));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(replicas);
  auto work = [&] {
    for (std::size_t i = next++; i < replicas; i = next++) {
      try {
        out[i] = simulate(spec, duration_s, seed + i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

Json aggregate(const NetworkSpec& spec, double duration_s,
               const std::vector<SimulationResult>& results) {
  const std::size_t nl = spec.links.size();
  std::vector<std::uint64_t> attempts(nl, 0), heralds(nl, 0);
  std::vector<double> active(nl, 0.0), fid(nl, 0.0);
  for (const auto& r : results) {
    const auto& links = r.summary.at("links");
    if (links.size() != nl) throw ConfigError("replica summary does not match the spec");
    for (std::size_t l = 0; l < nl; ++l) {
      const auto& b = links[l];
      attempts[l] += b.at("attempts").get<std::uint64_t>();
      heralds[l] += b.at("heralds").get<std::uint64_t>();
      active[l] += b.at("active_time_s").get<double>();
      if (!b.at("mean_herald_fidelity").is_null())
        fid[l] += b.at("mean_herald_fidelity").get<double>() * b.at("heralds").get<double>();
    }
  }
  const double total = duration_s * static_cast<double>(results.size());
  Json s;
  s["schema_version"] = kSchemaVersion;
  s["replicas"] = results.size();
  s["duration_s"] = duration_s;
  s["links"] = Json::array();
  for (std::size_t l = 0; l < nl; ++l)
    s["links"].push_back(link_block(spec, l, total, attempts[l], active[l], heralds[l], fid[l]));
  s["metadata"] = metadata(spec);
  return s;
}

}  // namespace qionsim::nethost
