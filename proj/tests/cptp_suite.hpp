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

// Shared by test_cptp and the acceptance binary: pushes seeded random density
// matrices through every exported channel and gate and records the worst
// trace error and most negative eigenvalue per operation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qionsim/common.hpp"
#include "qionsim/crystal.hpp"
#include "qionsim/gates.hpp"
#include "qionsim/nethost.hpp"
#include "qionsim/photonics.hpp"
#include "qionsim/protocols.hpp"
#include "qionsim/qsim.hpp"

namespace qionsim::cptp_suite {

struct OpReport {
  std::string name;
  int states = 0;
  double max_trace_error = 0.0;
  double min_eigenvalue = 1.0;

  bool ok(double tol = 1e-9) const {
    return max_trace_error <= tol && min_eigenvalue >= -tol;
  }
};

// Ginibre ensemble with a random rank, normalized to unit trace.
inline qsim::Matrix random_density(Eigen::Index dim, Rng& rng) {
  const auto rank = 1 + static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(dim));
  qsim::Matrix g(dim, rank);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < rank; ++j)
      g(i, j) = qsim::Complex(rng.normal(0, 1), rng.normal(0, 1));
  qsim::Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return rho;
}

inline void record(OpReport& r, const qsim::Matrix& rho) {
  const qsim::Matrix h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<qsim::Matrix> es(h, Eigen::EigenvaluesOnly);
  r.max_trace_error = std::max(r.max_trace_error, std::abs(rho.trace().real() - 1.0));
  r.max_trace_error = std::max(r.max_trace_error, std::abs(rho.trace().imag()));
  r.min_eigenvalue = std::min(r.min_eigenvalue, es.eigenvalues().minCoeff());
  ++r.states;
}

using Op = std::function<qsim::Matrix(const qsim::Matrix&)>;

struct NamedOp {
  std::string name;
  qsim::HilbertSpec spec;
  Op op;
};

inline gates::NodeState node_from(const qsim::Matrix& rho, const qsim::HilbertSpec& spec) {
  return gates::NodeState{qsim::QuantumState(spec, rho),
                          {crystal::ba138(), crystal::yb171()},
                          {true, true},
                          {}};
}

// Every operation the library exports that maps states to states. Trace
// non-increasing pieces of instruments are summed over outcomes.
inline std::vector<NamedOp> operations() {
  using qsim::HilbertSpec;
  using qsim::QuantumState;
  using qsim::Subsystem;
  // Small mode keeps the integrated gates cheap enough for 100 states each.
  const int nmax = 2;
  const HilbertSpec q2({Subsystem::qubit(), Subsystem::qubit()});
  const HilbertSpec qqm({Subsystem::qubit(), Subsystem::qubit(), Subsystem::fock(nmax)});
  const HilbertSpec qm({Subsystem::qubit(), Subsystem::fock(nmax)});
  const HilbertSpec m({Subsystem::fock(nmax)});

  std::vector<NamedOp> ops;
  auto channel = [](const qsim::Channel& c) {
    return [c](const qsim::Matrix& rho) {
      const HilbertSpec s({Subsystem::qubit(), Subsystem::qubit()});
      return qsim::apply_channel(QuantumState(s, rho), c, {1}).rho();
    };
  };
  ops.push_back({"depolarizing", q2, channel(qsim::depolarizing(0.3))});
  ops.push_back({"dephasing", q2, channel(qsim::dephasing(0.4))});
  ops.push_back({"bit_flip", q2, channel(qsim::bit_flip(0.2))});
  ops.push_back({"depolarizing_fock", m, [m](const qsim::Matrix& rho) {
                   return qsim::apply_channel(QuantumState(m, rho), qsim::depolarizing(0.5, nmax + 1), {0}).rho();
                 }});
  ops.push_back({"unitary", q2, [q2](const qsim::Matrix& rho) {
                   return qsim::apply_unitary(QuantumState(q2, rho), qsim::ops::rotation(1.1, 0.3), {0}).rho();
                 }});
  ops.push_back({"partial_trace", qm, [qm](const qsim::Matrix& rho) {
                   return qsim::partial_trace(QuantumState(qm, rho), {0}).rho();
                 }});
  ops.push_back({"apply_heating", qm, [qm](const qsim::Matrix& rho) {
                   return qsim::apply_heating(QuantumState(qm, rho), 1, 5.0, 0.1).rho();
                 }});
  ops.push_back({"evolve", qm, [qm](const qsim::Matrix& rho) {
                   qsim::LindbladGenerator gen;
                   const qsim::Matrix a = qsim::ops::annihilation(nmax);
                   const qsim::Matrix h = qsim::ops::sigma_x();
                   gen.hamiltonian.push_back({qsim::embed(h, qm, {0}), {}});
                   gen.jumps.push_back(qsim::embed(std::sqrt(0.7) * a, qm, {1}));
                   gen.jumps.push_back(qsim::embed(std::sqrt(0.3) * qsim::ops::sigma_z(), qm, {0}));
                   return qsim::evolve(QuantumState(qm, rho), gen, 0.0, 1.0).rho();
                 }});

  gates::NoiseConfig noisy;
  noisy.scatter_per_rabi_cycle = 0.01;
  noisy.crosstalk.mode = gates::CrosstalkMode::raw;
  ops.push_back({"carrier", qqm, [qqm, noisy](const qsim::Matrix& rho) {
                   gates::PulseParams p;
                   p.rabi_freq_hz = 1e5;
                   p.duration_s = 7e-6;
                   p.phase = 0.4;
                   return gates::carrier(node_from(rho, qqm), p, noisy).state.rho();
                 }});
  ops.push_back({"sideband", qqm, [qqm](const qsim::Matrix& rho) {
                   gates::PulseParams p;
                   p.kind = gates::PulseKind::rsb;
                   p.rabi_freq_hz = 1e5;
                   p.duration_s = 40e-6;
                   return gates::sideband(node_from(rho, qqm), p, 0.1, gates::NoiseConfig{}).state.rho();
                 }});
  const auto ms = gates::MSParams::single_loop(100e-6);
  ops.push_back({"ms_gate_analytic", qqm, [qqm, ms](const qsim::Matrix& rho) {
                   return gates::ms_gate_analytic(node_from(rho, qqm), ms).state.rho();
                 }});
  ops.push_back({"ms_gate_integrated", qqm, [qqm, ms](const qsim::Matrix& rho) {
                   return gates::ms_gate_integrated(node_from(rho, qqm), ms, gates::NoiseConfig{}).state.rho();
                 }});
  ops.push_back({"ms_swap", qqm, [qqm, ms](const qsim::Matrix& rho) {
                   return gates::ms_swap(node_from(rho, qqm), ms, gates::NoiseConfig{}).state.rho();
                 }});
  ops.push_back({"leakage_step", qqm, [qqm](const qsim::Matrix& rho) {
                   protocols::LeakageModel lm;
                   lm.shelve_prob_per_scatter = 0.5;
                   Rng rng(7);
                   return protocols::leakage_step(node_from(rho, qqm), 0, {1e-3, 2e-3}, 0.0, 1.0, lm, rng)
                       .node.state.rho();
                 }});

  // Photon errors: the atom-photon pair map is fixed, so feed random pairs
  // through the analyzer and sum the outcome branches.
  const HilbertSpec pair = photonics::pair_spec();
  ops.push_back({"bsa_instrument", tensor(pair, pair), [pair](const qsim::Matrix& rho) {
                   // Product input: the analyzer takes two independent pairs.
                   const QuantumState joint(tensor(pair, pair), rho);
                   const auto a = qsim::partial_trace(joint, {0, 1});
                   const auto b = qsim::partial_trace(joint, {2, 3});
                   const auto d = photonics::bell_state_analyzer(a, b, 0.8);
                   return qsim::Matrix(d.p_psi_plus * d.atoms_psi_plus.rho() +
                                       d.p_psi_minus * d.atoms_psi_minus.rho() +
                                       d.p_none * d.atoms_none.rho());
                 }});

  nethost::NodeSpec node;
  node.id = "n";
  node.roles = {nethost::Role::communication, nethost::Role::memory};
  const qsim::Matrix superop = nethost::swap_superoperator(node);
  ops.push_back({"swap_superoperator", q2, [superop](const qsim::Matrix& rho) {
                   return nethost::apply_to_side(rho, superop, 1);
                 }});
  return ops;
}

// Choi matrix of a 4x4 row-major superoperator; PSD and unit partial trace
// over the output for a CPTP map.
inline qsim::Matrix choi(const qsim::Matrix& superop) {
  qsim::Matrix c = qsim::Matrix::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      qsim::Matrix e = qsim::Matrix::Zero(2, 2);
      e(i, j) = 1.0;
      qsim::Vector v(4);
      for (int r = 0; r < 2; ++r)
        for (int s = 0; s < 2; ++s) v(2 * r + s) = e(r, s);
      const qsim::Vector out = superop * v;
      for (int r = 0; r < 2; ++r)
        for (int s = 0; s < 2; ++s) c(2 * i + r, 2 * j + s) = out(2 * r + s);
    }
  return c;
}

inline std::vector<OpReport> run(int n_states, std::uint64_t seed) {
  std::vector<OpReport> out;
  for (const auto& op : operations()) {
    OpReport r;
    r.name = op.name;
    Rng rng = Rng::stream(seed, "cptp:" + op.name);
    for (int k = 0; k < n_states; ++k)
      record(r, op.op(random_density(static_cast<Eigen::Index>(op.spec.dim()), rng)));
    out.push_back(r);
  }
  return out;
}

}  // namespace qionsim::cptp_suite
