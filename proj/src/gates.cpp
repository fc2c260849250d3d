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

#include "qionsim/gates.hpp"

#include <cmath>
#include <sstream>

namespace qionsim::gates {

using qsim::Complex;
using qsim::Matrix;

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError(std::string(what) + " must be in [0, 1]");
}

void check_ion(const NodeState& node, std::size_t ion) {
  if (ion >= node.ions.size()) throw ConfigError("ion index out of range");
}

int mode_n_max(const NodeState& node, std::size_t slot) {
  if (slot >= node.n_modes()) throw ConfigError("mode index out of range");
  return node.state.spec().at(node.mode(slot)).n_max;
}

bool is_species(const crystal::Species& s, const char* name) {
  return s.name == name;
}

// sigma_phi = cos(phi) X + sin(phi) Y.
Matrix spin_operator(double phi) {
  return std::cos(phi) * qsim::ops::sigma_x() +
         std::sin(phi) * qsim::ops::sigma_y();
}

double factorial_ratio_sqrt(unsigned small, unsigned large) {
  // sqrt(small! / large!)
  double r = 1.0;
  for (unsigned k = small + 1; k <= large; ++k) r /= std::sqrt(static_cast<double>(k));
  return r;
}

// <m|D(beta)|n> of the untruncated displacement operator.
Matrix displacement(Complex beta, int n_max) {
  const int d = n_max + 1;
  Matrix out(d, d);
  const double x = std::norm(beta);
  const double env = std::exp(-0.5 * x);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) {
      const auto um = static_cast<unsigned>(m);
      const auto un = static_cast<unsigned>(n);
      if (m >= n) {
        out(m, n) = factorial_ratio_sqrt(un, um) * std::pow(beta, m - n) * env *
                    std::assoc_laguerre(un, um - un, x);
      } else {
        out(m, n) = factorial_ratio_sqrt(um, un) *
                    std::pow(-std::conj(beta), n - m) * env *
                    std::assoc_laguerre(um, un - um, x);
      }
    }
  return out;
}

NodeState apply_on(NodeState node, const Matrix& u,
                   const std::vector<std::size_t>& targets) {
  node.state = qsim::apply_unitary(node.state,
                                   qsim::embed(u, node.state.spec(), targets));
  return node;
}

void note(NodeState& node, const std::string& msg) { node.log.push_back(msg); }

}  // namespace

NodeState make_node(std::vector<crystal::Species> ions,
                    const std::vector<qsim::QuantumState>& modes) {
  if (ions.empty()) throw ConfigError("node needs at least one ion");
  std::vector<qsim::Subsystem> subs(ions.size(), qsim::Subsystem::qubit());
  qsim::Matrix rho = qsim::Matrix::Ones(1, 1);
  for (std::size_t i = 0; i < ions.size(); ++i) {
    qsim::Matrix q = qsim::Matrix::Zero(2, 2);
    q(0, 0) = 1.0;
    rho = kron(rho, q);
  }
  for (const auto& m : modes) {
    if (m.spec().size() != 1 ||
        m.spec().at(0).kind != qsim::Subsystem::Kind::fock)
      throw DimensionError("mode states must be single Fock subsystems");
    subs.push_back(m.spec().at(0));
    rho = kron(rho, m.rho());
  }
  NodeState node{qsim::QuantumState(qsim::HilbertSpec(std::move(subs)), rho),
                 std::move(ions), {}, {}};
  node.available.assign(node.ions.size(), true);
  return node;
}

void PulseParams::validate() const {
  if (!(rabi_freq_hz >= 0.0)) throw ConfigError("Rabi frequency must be >= 0");
  if (!(duration_s >= 0.0)) throw ConfigError("pulse duration must be >= 0");
}

void CrosstalkConfig::validate() const {
  check_probability(ratio_532_on_yb, "crosstalk ratio_532_on_yb");
  check_probability(ratio_355_on_ba, "crosstalk ratio_355_on_ba");
  check_probability(suppressed_ratio, "crosstalk suppressed_ratio");
}

double CrosstalkConfig::ratio(const crystal::Species& target,
                              const crystal::Species& other) const {
  if (mode == CrosstalkMode::off || target.name == other.name) return 0.0;
  const bool yb_beam_on_ba = is_species(target, "Yb171") && is_species(other, "Ba138");
  const bool ba_beam_on_yb = is_species(target, "Ba138") && is_species(other, "Yb171");
  if (!yb_beam_on_ba && !ba_beam_on_yb) return 0.0;
  if (mode == CrosstalkMode::suppressed) return suppressed_ratio;
  return yb_beam_on_ba ? ratio_355_on_ba : ratio_532_on_yb;
}

NoiseConfig NoiseConfig::off() {
  NoiseConfig n;
  n.heating_rate_per_ms = 0.0;
  n.spam_error = 0.0;
  n.scatter_per_rabi_cycle = 0.0;
  n.crosstalk.mode = CrosstalkMode::off;
  return n;
}

void NoiseConfig::validate() const {
  if (!(heating_rate_per_ms >= 0.0)) throw ConfigError("heating rate must be >= 0");
  check_probability(spam_error, "spam_error");
  check_probability(scatter_per_rabi_cycle, "scatter_per_rabi_cycle");
  crosstalk.validate();
}

double scatter_probability(const PulseParams& pulse, const NoiseConfig& noise) {
  const double cycles = pulse.rabi_freq_hz * pulse.duration_s;
  return std::min(1.0, noise.scatter_per_rabi_cycle * cycles);
}

NodeState carrier(NodeState node, const PulseParams& pulse,
                  const NoiseConfig& noise) {
  pulse.validate();
  check_ion(node, pulse.target);
  if (!node.available[pulse.target]) {
    note(node, "carrier skipped: ion " + std::to_string(pulse.target) + " shelved");
    return node;
  }
  const double theta = constants::two_pi * pulse.rabi_freq_hz * pulse.duration_s;
  node = apply_on(std::move(node), qsim::ops::rotation(theta, pulse.phase),
                  {node.qubit(pulse.target)});
  for (std::size_t i = 0; i < node.ions.size(); ++i) {
    if (i == pulse.target || !node.available[i]) continue;
    const double r = noise.crosstalk.ratio(node.ions[pulse.target], node.ions[i]);
    if (r > 0.0)
      node = apply_on(std::move(node), qsim::ops::rotation(theta * r, pulse.phase),
                      {node.qubit(i)});
  }
  const double p = scatter_probability(pulse, noise);
  if (p > 0.0)
    node.state = qsim::apply_channel(node.state, qsim::depolarizing(p),
                                     {node.qubit(pulse.target)});
  return node;
}

Matrix sideband_unitary(PulseKind kind, int n_max, double sideband_rabi_hz,
                        double phase, double duration_s) {
  if (kind == PulseKind::carrier)
    throw ConfigError("sideband_unitary called with a carrier pulse");
  const int levels = n_max + 1;
  Matrix u = Matrix::Identity(2 * levels, 2 * levels);
  const double base = constants::two_pi * sideband_rabi_hz * duration_s;
  auto set_block = [&](int g, int e, double n_factor) {
    const Matrix r = qsim::ops::rotation(base * std::sqrt(n_factor), phase);
    u(g, g) = r(0, 0);
    u(g, e) = r(0, 1);
    u(e, g) = r(1, 0);
    u(e, e) = r(1, 1);
  };
  if (kind == PulseKind::rsb) {
    for (int n = 1; n <= n_max; ++n) set_block(n, levels + n - 1, n);
  } else {
    for (int n = 0; n < n_max; ++n) set_block(n, levels + n + 1, n + 1);
  }
  return u;
}

NodeState sideband(NodeState node, const PulseParams& pulse, double eta,
                   const NoiseConfig& noise) {
  pulse.validate();
  if (pulse.kind == PulseKind::carrier)
    throw ConfigError("sideband() needs an rsb or bsb pulse");
  if (!(eta >= 0.0)) throw ConfigError("Lamb-Dicke parameter must be >= 0");
  check_ion(node, pulse.target);
  const int n_max = mode_n_max(node, pulse.mode);
  if (!node.available[pulse.target]) {
    note(node, "sideband skipped: ion " + std::to_string(pulse.target) + " shelved");
    return node;
  }
  const std::size_t q = node.qubit(pulse.target);
  const std::size_t m = node.mode(pulse.mode);

  const double nbar = qsim::mean_occupation(node.state, m);
  if (eta * eta * (2.0 * nbar + 1.0) > 0.1) {
    std::ostringstream msg;
    msg << "outside Lamb-Dicke regime: eta^2 (2 nbar + 1) = "
        << eta * eta * (2.0 * nbar + 1.0);
    note(node, msg.str());
  }
  // Population that the pulse would push past the truncation.
  {
    const int edge_qubit = pulse.kind == PulseKind::rsb ? 1 : 0;
    double edge = 0.0;
    const auto& spec = node.state.spec();
    for (std::size_t i = 0; i < spec.dim(); ++i) {
      const auto dig = spec.digits(i);
      if (dig[q] == edge_qubit && dig[m] == n_max)
        edge += node.state.rho()(static_cast<Eigen::Index>(i),
                                 static_cast<Eigen::Index>(i)).real();
    }
    if (edge > 1e-6) {
      std::ostringstream msg;
      msg << "sideband couples to the n_max boundary with population " << edge;
      note(node, msg.str());
    }
  }

  const double sb_rabi = pulse.rabi_freq_hz * eta;
  if (noise.heating_rate_per_ms == 0.0) {
    node = apply_on(std::move(node),
                    sideband_unitary(pulse.kind, n_max, sb_rabi, pulse.phase,
                                     pulse.duration_s),
                    {q, m});
  } else {
    const Matrix a = qsim::ops::annihilation(n_max);
    const Matrix coupling =
        pulse.kind == PulseKind::rsb ? Matrix(a) : Matrix(a.adjoint());
    const Matrix raise = std::exp(Complex(0.0, pulse.phase)) *
                         kron(qsim::ops::sigma_plus(), coupling);
    const Matrix h = 0.5 * constants::two_pi * sb_rabi * (raise + raise.adjoint());
    qsim::LindbladGenerator gen;
    gen.hamiltonian.push_back({qsim::embed(h, node.state.spec(), {q, m}), {}});
    const double gamma = noise.heating_rate_per_ms * 1e3;
    gen.jumps.push_back(qsim::embed(std::sqrt(gamma) * a, node.state.spec(), {m}));
    gen.jumps.push_back(
        qsim::embed(std::sqrt(gamma) * Matrix(a.adjoint()), node.state.spec(), {m}));
    node.state = qsim::evolve(node.state, gen, 0.0, pulse.duration_s);
  }
  const double p = scatter_probability(pulse, noise);
  if (p > 0.0)
    node.state = qsim::apply_channel(node.state, qsim::depolarizing(p), {q});
  return node;
}

MSParams MSParams::single_loop(double gate_time_s, double force_phase,
                               std::size_t mode) {
  if (!(gate_time_s > 0.0)) throw ConfigError("MS gate time must be positive");
  MSParams p;
  p.gate_time_s = gate_time_s;
  p.detuning_hz = 1.0 / gate_time_s;
  p.sideband_rabi_hz = {0.5 * p.detuning_hz, 0.5 * p.detuning_hz};
  p.force_phase = force_phase;
  p.mode = mode;
  return p;
}

bool MSParams::loop_closed(double tol) const {
  const double loops = detuning_hz * gate_time_s;
  return std::round(loops) >= 1.0 && std::abs(loops - std::round(loops)) < tol;
}

void MSParams::validate() const {
  if (!(gate_time_s > 0.0)) throw ConfigError("MS gate time must be positive");
  if (!(detuning_hz > 0.0)) throw ConfigError("MS detuning must be positive");
  if (!(sideband_rabi_hz[0] >= 0.0) || !(sideband_rabi_hz[1] >= 0.0))
    throw ConfigError("MS sideband Rabi frequencies must be >= 0");
  if (ions[0] == ions[1]) throw ConfigError("MS gate needs two distinct ions");
}

double MSParams::spin_phase() const {
  return 0.5 * (0.5 * constants::pi - force_phase);
}

Matrix ms_unitary(const MSParams& params, int n_max, double t) {
  params.validate();
  const double delta = constants::two_pi * params.detuning_hz;
  const double k1 = constants::pi * params.sideband_rabi_hz[0];
  const double k2 = constants::pi * params.sideband_rabi_hz[1];
  const Complex i(0.0, 1.0);
  const Complex beta_unit = (1.0 - std::exp(i * delta * t)) / delta;
  const double phase_unit = t / delta - std::sin(delta * t) / (delta * delta);

  const double phi = params.spin_phase();
  const Complex e = std::exp(i * phi);
  qsim::Vector plus(2), minus(2);
  plus << 1.0 / std::sqrt(2.0), e / std::sqrt(2.0);
  minus << 1.0 / std::sqrt(2.0), -e / std::sqrt(2.0);
  const std::array<qsim::Vector, 2> eig{plus, minus};
  const std::array<double, 2> sign{1.0, -1.0};

  const int levels = n_max + 1;
  Matrix u = Matrix::Zero(4 * levels, 4 * levels);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double ak = k1 * sign[a] + k2 * sign[b];
      const qsim::Vector spin = qsim::Vector(kron(eig[a], eig[b]));
      const Matrix proj = spin * spin.adjoint();
      const Matrix motion =
          std::exp(i * phase_unit * ak * ak) * displacement(beta_unit * ak, n_max);
      u += kron(proj, motion);
    }
  return u;
}

namespace {

void check_ms_node(const NodeState& node, const MSParams& params) {
  params.validate();
  check_ion(node, params.ions[0]);
  check_ion(node, params.ions[1]);
  mode_n_max(node, params.mode);
}

void note_closure(NodeState& node, const MSParams& params) {
  if (params.loop_closed()) return;
  const double delta = constants::two_pi * params.detuning_hz;
  const double r = std::abs(1.0 - std::exp(Complex(0.0, delta * params.gate_time_s))) /
                   delta * constants::pi *
                   (params.sideband_rabi_hz[0] + params.sideband_rabi_hz[1]);
  std::ostringstream msg;
  msg << "MS loop not closed: residual displacement up to " << r;
  note(node, msg.str());
}

bool ms_blocked(NodeState& node, const MSParams& params) {
  for (auto ion : params.ions)
    if (!node.available[ion]) {
      note(node, "MS gate skipped: ion " + std::to_string(ion) + " shelved");
      return true;
    }
  return false;
}

}  // namespace

NodeState ms_gate_analytic(NodeState node, const MSParams& params) {
  check_ms_node(node, params);
  if (ms_blocked(node, params)) return node;
  note_closure(node, params);
  const int n_max = mode_n_max(node, params.mode);
  const Matrix u = ms_unitary(params, n_max, params.gate_time_s);
  const auto full = qsim::embed(
      u, node.state.spec(),
      {node.qubit(params.ions[0]), node.qubit(params.ions[1]), node.mode(params.mode)});
  node.state = qsim::apply_unitary(node.state, full);
  return node;
}

NodeState ms_gate_integrated(NodeState node, const MSParams& params,
                             const NoiseConfig& noise,
                             const qsim::IntegratorOptions& options) {
  check_ms_node(node, params);
  if (ms_blocked(node, params)) return node;
  note_closure(node, params);
  const int n_max = mode_n_max(node, params.mode);
  const double delta = constants::two_pi * params.detuning_hz;
  const Matrix s = spin_operator(params.spin_phase());
  const Matrix id2 = qsim::ops::identity(2);
  const Matrix spins = constants::pi * params.sideband_rabi_hz[0] * kron(s, id2) +
                       constants::pi * params.sideband_rabi_hz[1] * kron(id2, s);
  const Matrix a = qsim::ops::annihilation(n_max);
  const std::vector<std::size_t> targets{node.qubit(params.ions[0]),
                                         node.qubit(params.ions[1]),
                                         node.mode(params.mode)};
  const auto& spec = node.state.spec();
  qsim::LindbladGenerator gen;
  gen.hamiltonian.push_back(
      {qsim::embed(kron(spins, a.adjoint()), spec, targets),
       [delta](double t) { return std::exp(Complex(0.0, delta * t)); }});
  gen.hamiltonian.push_back(
      {qsim::embed(kron(spins, a), spec, targets),
       [delta](double t) { return std::exp(Complex(0.0, -delta * t)); }});
  if (noise.heating_rate_per_ms > 0.0) {
    const double gamma = noise.heating_rate_per_ms * 1e3;
    gen.jumps.push_back(qsim::embed(std::sqrt(gamma) * a, spec, {targets[2]}));
    gen.jumps.push_back(
        qsim::embed(std::sqrt(gamma) * Matrix(a.adjoint()), spec, {targets[2]}));
  }
  qsim::IntegratorOptions opt = options;
  // Resolve at least a few dozen steps per phase-space loop.
  const auto loops = static_cast<std::size_t>(
      std::ceil(params.detuning_hz * params.gate_time_s));
  opt.initial_steps = std::max(opt.initial_steps, 32 * std::max<std::size_t>(loops, 1));
  node.state = qsim::evolve(node.state, gen, 0.0, params.gate_time_s, opt);
  return node;
}

NodeState ms_gate(NodeState node, const MSParams& params,
                  const NoiseConfig& noise) {
  if (noise.heating_rate_per_ms == 0.0) return ms_gate_analytic(std::move(node), params);
  return ms_gate_integrated(std::move(node), params, noise);
}

NodeState ms_swap(NodeState node, const MSParams& params,
                  const NoiseConfig& noise) {
  node = ms_gate(std::move(node), params, noise);
  MSParams second = params;
  second.force_phase = params.force_phase + constants::pi;
  return ms_gate(std::move(node), second, noise);
}

Matrix ms_swap_correction() { return qsim::ops::rz(-0.5 * constants::pi); }

double spin_purity(const NodeState& node, const MSParams& params) {
  std::vector<std::size_t> keep{node.qubit(params.ions[0]), node.qubit(params.ions[1])};
  if (keep[0] > keep[1]) std::swap(keep[0], keep[1]);
  return qsim::partial_trace(node.state, keep).purity();
}

double motional_purity(const NodeState& node, std::size_t mode) {
  return qsim::partial_trace(node.state, {node.mode(mode)}).purity();
}

}  // namespace qionsim::gates
