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

#include "qionsim/protocols.hpp"

#include <algorithm>
#include <cmath>

#include "qionsim/detection.hpp"

namespace qionsim::protocols {

using gates::NodeState;
using gates::PulseKind;
using gates::PulseParams;

namespace {

void check_positive(double v, const char* what) {
  if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be > 0");
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError(std::string(what) + " must be in [0, 1]");
}

std::size_t find_species(const crystal::IonChain& chain, const std::string& name) {
  for (std::size_t i = 0; i < chain.size(); ++i)
    if (chain.ions[i].name == name) return i;
  throw ConfigError("chain has no " + name + " ion");
}

std::size_t mode_index(const crystal::ModeSet& set, const std::string& label) {
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set.modes[i].label == label) return i;
  throw ConfigError("no mode labelled '" + label + "' in direction " +
                    crystal::to_string(set.direction));
}

std::vector<std::string> merged(std::vector<std::string> a,
                                const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Joint z populations of two qubit subsystems, index 2 * first + second.
std::array<double, 4> pair_populations(const qsim::QuantumState& s,
                                       std::size_t first, std::size_t second) {
  std::array<double, 4> p{};
  const auto& spec = s.spec();
  for (std::size_t i = 0; i < spec.dim(); ++i) {
    const auto d = spec.digits(i);
    const auto k = static_cast<std::size_t>(2 * d[first] + d[second]);
    p[k] += std::max(0.0, s.rho()(static_cast<Eigen::Index>(i),
                                  static_cast<Eigen::Index>(i)).real());
  }
  const double total = p[0] + p[1] + p[2] + p[3];
  for (auto& v : p) v /= total;
  return p;
}

// Independent readout flips with probability s on both bits.
std::array<double, 4> with_readout_error(const std::array<double, 4>& p, double s) {
  std::array<double, 4> out{};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const int flips = ((a ^ b) & 1) + (((a ^ b) >> 1) & 1);
      const double w = std::pow(s, flips) * std::pow(1.0 - s, 2 - flips);
      out[static_cast<std::size_t>(b)] += w * p[static_cast<std::size_t>(a)];
    }
  return out;
}

}  // namespace

void EITCoolingModel::validate() const {
  if (!(target_nbar_op >= 0.0) || !(target_nbar_ip >= 0.0))
    throw ConfigError("EIT target n-bar must be >= 0");
}

double EITCoolingModel::nbar(const std::string& label) const {
  return label == "IP" ? target_nbar_ip : target_nbar_op;
}

void CoherenceModel::validate() const {
  check_positive(yb_t2_s, "coherence.yb_t2");
  check_positive(ba_t2_bare_s, "coherence.ba_t2_bare");
  check_positive(ba_t2_compensated_s, "coherence.ba_t2_compensated");
  check_positive(ba_zeeman_khz_per_mg, "coherence.ba_zeeman_sensitivity");
}

double CoherenceModel::ba_t2_s() const {
  return compensation_enabled ? ba_t2_compensated_s : ba_t2_bare_s;
}

double CoherenceModel::ba_field_noise_mg() const {
  // exp(-(2 pi s sigma t)^2 / 2) = 1/e at t = T2.
  return std::sqrt(2.0) /
         (constants::two_pi * ba_zeeman_khz_per_mg * 1e3 * ba_t2_s());
}

double coherence_factor(Qubit qubit, double delay_s, const CoherenceModel& model) {
  if (!(delay_s >= 0.0)) throw ConfigError("delay must be >= 0");
  model.validate();
  if (qubit == Qubit::yb) return std::exp(-delay_s / model.yb_t2_s);
  const double sigma_rad = constants::two_pi * model.ba_zeeman_khz_per_mg * 1e3 *
                           model.ba_field_noise_mg() * delay_s;
  return std::exp(-0.5 * sigma_rad * sigma_rad);
}

void LeakageModel::validate() const {
  check_probability(shelve_prob_per_scatter, "leakage.shelve_prob_per_scatter");
  check_positive(d52_lifetime_s, "leakage.d52_lifetime");
  check_positive(deshelve_time_with_led_s, "leakage.deshelve_time_with_led");
}

double LeakageModel::mean_recovery_s() const {
  const double rate = 1.0 / d52_lifetime_s + (led_on ? 1.0 / deshelve_time_with_led_s : 0.0);
  return 1.0 / rate;
}

void RamanConfig::validate() const {
  if (!(ba_rabi_hz >= 0.0) || !(yb_rabi_hz >= 0.0))
    throw ConfigError("Raman Rabi frequencies must be >= 0");
  check_positive(ba_wavelength_m, "raman.ba_wavelength");
  check_positive(yb_wavelength_m, "raman.yb_wavelength");
}

void NodeModel::validate() const {
  chain.validate();
  trap.validate();
  eit.validate();
  raman.validate();
  if (n_max < 1) throw ConfigError("n_max must be >= 1");
  ba_index();
  yb_index();
}

std::size_t NodeModel::ba_index() const { return find_species(chain, "Ba138"); }
std::size_t NodeModel::yb_index() const { return find_species(chain, "Yb171"); }

double NodeModel::rabi_hz(std::size_t ion) const {
  const auto& name = chain.ions.at(ion).name;
  if (name == "Ba138") return raman.ba_rabi_hz;
  if (name == "Yb171") return raman.yb_rabi_hz;
  throw ConfigError("no Raman drive configured for " + name);
}

double NodeModel::delta_k(std::size_t ion) const {
  const auto& name = chain.ions.at(ion).name;
  if (name == "Ba138")
    return crystal::delta_k_for_beams(raman.ba_wavelength_m, raman.beam_angle_rad);
  if (name == "Yb171")
    return crystal::delta_k_for_beams(raman.yb_wavelength_m, raman.beam_angle_rad);
  throw ConfigError("no Raman drive configured for " + name);
}

Prepared prepare(const NodeModel& model, double spam_error, Rng* rng) {
  model.validate();
  check_probability(spam_error, "spam_error");
  const auto modes = crystal::normal_modes(model.chain, model.trap, model.mode.direction);
  const std::size_t k = mode_index(modes, model.mode.label);
  Prepared out{gates::make_node(model.chain.ions, {}), modes.modes[k],
               model.eit.nbar(model.mode.label), {}, {}};
  auto thermal = qsim::thermal_state(out.nbar, model.n_max);
  out.warnings = thermal.warnings;
  out.node = gates::make_node(model.chain.ions, {thermal.state});
  for (std::size_t i = 0; i < model.chain.size(); ++i) {
    out.eta.push_back(crystal::lamb_dicke(modes, k, i, model.delta_k(i)));
    if (spam_error == 0.0) continue;
    if (rng) {
      if (rng->bernoulli(spam_error))
        out.node.state = qsim::apply_unitary(out.node.state, qsim::ops::sigma_x(),
                                             {out.node.qubit(i)});
    } else {
      out.node.state = qsim::apply_channel(out.node.state, qsim::bit_flip(spam_error),
                                           {out.node.qubit(i)});
    }
  }
  return out;
}

void CzConfig::validate() const {
  if (!(rsb_area_scale >= 0.0)) throw ConfigError("cz.rsb_area_scale must be >= 0");
  if (!(optical_phase_jitter_rad >= 0.0))
    throw ConfigError("cz.optical_phase_jitter must be >= 0");
}

namespace {

struct CzRun {
  NodeState node;
  std::vector<std::string> warnings;
};

// Prepares the node and applies carrier(theta-defining duration, phase) on
// Ba followed by the two sideband transfers.
CzRun run_cz(double carrier_duration_s, const NodeModel& model, const CzConfig& cz,
             const gates::NoiseConfig& noise, std::array<double, 3> phases) {
  cz.validate();
  noise.validate();
  auto prep = prepare(model, noise.spam_error);
  const std::size_t ba = model.ba_index();
  const std::size_t yb = model.yb_index();
  NodeState node = std::move(prep.node);
  PulseParams p;
  p.target = ba;
  p.kind = PulseKind::carrier;
  p.rabi_freq_hz = model.rabi_hz(ba);
  p.phase = phases[0];
  p.duration_s = carrier_duration_s;
  node = gates::carrier(std::move(node), p, noise);
  for (auto [ion, phase] : {std::pair{ba, phases[1]}, std::pair{yb, phases[2]}}) {
    PulseParams s;
    s.target = ion;
    s.kind = PulseKind::rsb;
    s.rabi_freq_hz = model.rabi_hz(ion);
    s.phase = phase;
    s.mode = 0;
    const double eta = prep.eta[ion];
    if (!(eta > 0.0) || !(s.rabi_freq_hz > 0.0))
      throw ConfigError("sideband transfer needs a non-zero Rabi frequency and eta");
    s.duration_s = cz.rsb_area_scale / (2.0 * s.rabi_freq_hz * eta);
    node = gates::sideband(std::move(node), s, eta, noise);
  }
  return {std::move(node), std::move(prep.warnings)};
}

std::array<double, 3> jitter_phases(const CzConfig& cz, Rng& rng) {
  std::array<double, 3> ph{};
  if (cz.optical_phase_jitter_rad > 0.0)
    for (auto& v : ph) v = rng.normal(0.0, cz.optical_phase_jitter_rad);
  return ph;
}

}  // namespace

CzPoint cz_transfer(double duration_s, const NodeModel& model, const CzConfig& cz,
                    const gates::NoiseConfig& noise, Rng& rng, std::uint64_t shots) {
  if (!(duration_s >= 0.0)) throw ConfigError("rotation duration must be >= 0");
  auto run = run_cz(duration_s, model, cz, noise, jitter_phases(cz, rng));
  const std::size_t yb = run.node.qubit(model.yb_index());
  const double p = qsim::populations(run.node.state, yb)[1];
  CzPoint out;
  out.duration_s = duration_s;
  out.p_up = p * (1.0 - noise.spam_error) + (1.0 - p) * noise.spam_error;
  out.shots = shots;
  out.warnings = merged(std::move(run.warnings), run.node.log);
  if (shots > 0) {
    std::uint64_t ones = 0;
    for (std::uint64_t k = 0; k < shots; ++k)
      ones += static_cast<std::uint64_t>(
          detection::yb_detect(run.node.state, yb, noise.spam_error, rng));
    out.p_up_sampled = static_cast<double>(ones) / static_cast<double>(shots);
  }
  return out;
}

SinusoidFit fit_sinusoid(const std::vector<double>& x, const std::vector<double>& y,
                         double angular_freq) {
  if (x.size() != y.size() || x.size() < 3)
    throw ConfigError("sinusoid fit needs at least three points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = angular_freq * x[static_cast<std::size_t>(i)];
    a(i, 0) = 1.0;
    a(i, 1) = std::cos(w);
    a(i, 2) = std::sin(w);
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(b);
  SinusoidFit f;
  f.offset = c(0);
  f.cos_coeff = c(1);
  f.sin_coeff = c(2);
  f.amplitude = std::hypot(c(1), c(2));
  f.phase = std::atan2(c(2), c(1));
  f.residual_rms = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(n));
  return f;
}

CzSweep cz_transfer_sweep(const std::vector<double>& durations_s,
                          const NodeModel& model, const CzConfig& cz,
                          const gates::NoiseConfig& noise, Rng& rng,
                          std::uint64_t shots) {
  CzSweep sweep;
  std::vector<double> y;
  for (double t : durations_s) {
    sweep.points.push_back(cz_transfer(t, model, cz, noise, rng, shots));
    const auto& pt = sweep.points.back();
    y.push_back(pt.p_up_sampled ? *pt.p_up_sampled : pt.p_up);
  }
  const double w = constants::two_pi * model.rabi_hz(model.ba_index());
  sweep.fit = fit_sinusoid(durations_s, y, w);
  sweep.efficiency = 2.0 * sweep.fit.amplitude;
  return sweep;
}

double cz_coherence_transfer(const NodeModel& model, const CzConfig& cz,
                             const gates::NoiseConfig& noise, Rng& rng,
                             std::size_t samples) {
  if (samples == 0) throw ConfigError("coherence transfer needs samples > 0");
  const double quarter = 0.25 / model.rabi_hz(model.ba_index());  // pi/2 pulse
  qsim::Matrix avg;
  for (std::size_t k = 0; k < samples; ++k) {
    auto run = run_cz(quarter, model, cz, noise, jitter_phases(cz, rng));
    const auto yb = qsim::partial_trace(run.node.state, {run.node.qubit(model.yb_index())});
    if (k == 0)
      avg = yb.rho();
    else
      avg += yb.rho();
  }
  avg /= static_cast<double>(samples);
  return 2.0 * std::abs(avg(0, 1));
}

void MsConfig::validate() const {
  check_positive(gate_time_s, "ms.gate_time");
}

gates::MSParams MsConfig::params(const NodeModel& model) const {
  validate();
  auto p = gates::MSParams::single_loop(gate_time_s, force_phase, 0);
  p.ions = {model.ba_index(), model.yb_index()};
  return p;
}

qsim::Vector ms_target_state(double force_phase) {
  qsim::Vector v = qsim::Vector::Zero(4);
  v(0) = 1.0 / std::sqrt(2.0);
  v(3) = -std::exp(qsim::Complex(0.0, -force_phase)) / std::sqrt(2.0);
  return v;
}

ParityScan ms_parity_scan(const std::vector<double>& phases, const NodeModel& model,
                          const MsConfig& ms, const gates::NoiseConfig& noise) {
  noise.validate();
  auto prep = prepare(model, noise.spam_error);
  const auto params = ms.params(model);
  NodeState node = gates::ms_gate(std::move(prep.node), params, noise);
  const std::size_t ba = node.qubit(model.ba_index());
  const std::size_t yb = node.qubit(model.yb_index());

  ParityScan scan;
  scan.warnings = merged(std::move(prep.warnings), node.log);
  scan.populations = with_readout_error(pair_populations(node.state, ba, yb),
                                        noise.spam_error);
  const double quarter_ba = 0.25 / model.rabi_hz(model.ba_index());
  const double quarter_yb = 0.25 / model.rabi_hz(model.yb_index());
  auto parity_at = [&](double ba_phase, double yb_phase) {
    PulseParams pb;
    pb.target = model.ba_index();
    pb.rabi_freq_hz = model.rabi_hz(pb.target);
    pb.phase = ba_phase;
    pb.duration_s = quarter_ba;
    PulseParams py = pb;
    py.target = model.yb_index();
    py.rabi_freq_hz = model.rabi_hz(py.target);
    py.phase = yb_phase;
    py.duration_s = quarter_yb;
    NodeState n = gates::carrier(gates::carrier(node, pb, noise), py, noise);
    const auto p = with_readout_error(pair_populations(n.state, ba, yb), noise.spam_error);
    return p[0] + p[3] - p[1] - p[2];
  };
  for (double phi : phases) {
    scan.phases.push_back(phi);
    scan.parity.push_back(parity_at(ms.ba_analysis_phase, phi));
    scan.parity_quadrature.push_back(
        parity_at(ms.ba_analysis_phase + 0.5 * constants::pi, phi));
  }
  scan.fit = fit_sinusoid(scan.phases, scan.parity, 1.0);
  scan.fit_quadrature = fit_sinusoid(scan.phases, scan.parity_quadrature, 1.0);
  // Fringe phasor z(a) = A e^{i(a + t1)} + B e^{-i(a + t2)} for Ba phase a;
  // z(a) - i z(a + pi/2) = 2 A e^{i(a + t1)}.
  const qsim::Complex z0(scan.fit.cos_coeff, -scan.fit.sin_coeff);
  const qsim::Complex z1(scan.fit_quadrature.cos_coeff, -scan.fit_quadrature.sin_coeff);
  scan.parity_amplitude = 0.5 * std::abs(z0 - qsim::Complex(0.0, 1.0) * z1);
  const auto& pop = scan.populations;
  const double even = 0.5 * (pop[0] + pop[3]);
  scan.fidelity = std::clamp(even + 0.5 * scan.parity_amplitude, 0.0, 1.0);
  scan.single_scan_fidelity = std::clamp(even + 0.5 * scan.fit.amplitude, 0.0, 1.0);
  std::vector<std::size_t> keep{ba, yb};
  if (keep[0] > keep[1]) std::swap(keep[0], keep[1]);
  // The target is symmetric under exchanging the two qubits.
  scan.bell_fidelity =
      qsim::fidelity(qsim::partial_trace(node.state, keep), ms_target_state(ms.force_phase));
  return scan;
}

RamseyResult ramsey(Qubit qubit, double delay_s, const CoherenceModel& model,
                    const RamseyOptions& options) {
  if (!(delay_s >= 0.0)) throw ConfigError("Ramsey delay must be >= 0");
  if (options.phase_points < 3) throw ConfigError("Ramsey scan needs >= 3 phases");
  model.validate();
  const auto off = gates::NoiseConfig::off();
  NodeState node = gates::make_node({crystal::ba138(), crystal::yb171()}, {});
  const std::size_t target = qubit == Qubit::ba ? 0 : 1;
  PulseParams half;
  half.target = target;
  half.rabi_freq_hz = 1.0;
  half.duration_s = 0.25;
  node = gates::carrier(std::move(node), half, off);
  // Free evolution: each qubit dephases under its own model only.
  node.state = qsim::apply_channel(node.state,
                                   qsim::dephasing(coherence_factor(qubit, delay_s, model)),
                                   {target});
  if (options.ba_illumination)
    node.state = qsim::apply_channel(node.state, qsim::depolarizing(1.0), {0});
  RamseyResult r;
  for (std::size_t k = 0; k < options.phase_points; ++k) {
    const double phi = constants::two_pi * static_cast<double>(k) /
                       static_cast<double>(options.phase_points);
    PulseParams second = half;
    second.phase = phi;
    const auto n = gates::carrier(node, second, off);
    r.phases.push_back(phi);
    r.p_up.push_back(qsim::populations(n.state, target)[1]);
  }
  r.contrast = 2.0 * fit_sinusoid(r.phases, r.p_up, 1.0).amplitude;
  return r;
}

double ramsey_1e_time(Qubit qubit, const CoherenceModel& model,
                      const RamseyOptions& options) {
  const double level = std::exp(-1.0);
  double lo = 0.0, hi = 1e-6;
  while (ramsey(qubit, hi, model, options).contrast > level) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw ConvergenceError("Ramsey contrast never reaches 1/e");
  }
  while (hi - lo > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (ramsey(qubit, mid, model, options).contrast > level)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

LeakageOutcome leakage_step(NodeState node, std::size_t ion,
                            std::vector<double> scatter_times_s, double start_s,
                            double end_s, const LeakageModel& model, Rng& rng) {
  model.validate();
  if (ion >= node.ions.size()) throw ConfigError("ion index out of range");
  if (!(end_s >= start_s)) throw ConfigError("leakage window must have end >= start");
  std::sort(scatter_times_s.begin(), scatter_times_s.end());
  LeakageOutcome out{std::move(node), {}, {}, 0, std::nullopt};
  double cursor = start_s;
  std::optional<double> recover_at;
  if (!out.node.available[ion]) recover_at = start_s + rng.exponential(model.mean_recovery_s());

  auto close = [&](double t, bool available) {
    if (t > cursor) out.timeline.push_back({cursor, std::min(t, end_s), available});
    cursor = std::min(t, end_s);
  };
  std::size_t next = 0;
  while (true) {
    if (recover_at) {
      if (*recover_at > end_s) break;
      close(*recover_at, false);
      out.recovery_times_s.push_back(*recover_at);
      recover_at.reset();
      // Scatters while dark do not count.
      while (next < scatter_times_s.size() && scatter_times_s[next] < cursor) ++next;
      continue;
    }
    if (next >= scatter_times_s.size()) break;
    const double t = scatter_times_s[next++];
    if (t < start_s || t > end_s) throw ConfigError("scatter time outside the window");
    if (model.shelve_prob_per_scatter > 0.0 && rng.bernoulli(model.shelve_prob_per_scatter)) {
      close(t, true);
      ++out.shelving_events;
      recover_at = t + rng.exponential(model.mean_recovery_s());
    }
  }
  const bool dark = recover_at.has_value();
  close(end_s, !dark);
  if (out.timeline.empty()) out.timeline.push_back({start_s, end_s, !dark});
  out.node.available[ion] = !dark;
  out.pending_recovery_s = recover_at;
  if (dark) out.node.log.push_back("ion " + std::to_string(ion) + " shelved");
  return out;
}

}  // namespace qionsim::protocols
