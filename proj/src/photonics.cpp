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

#include "qionsim/photonics.hpp"

#include <algorithm>
#include <cmath>

namespace qionsim::photonics {

using qsim::Complex;
using qsim::Matrix;
using qsim::QuantumState;
using qsim::Vector;

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError(std::string("photon.") + what + " must be in [0, 1]");
}

Matrix projector(const Vector& v) { return v * v.adjoint(); }

Vector basis_vector(int dim, int k) {
  Vector v = Vector::Zero(dim);
  v(k) = 1.0;
  return v;
}

}  // namespace

void PhotonCollectionConfig::validate() const {
  check_probability(excitation_prob, "excitation_prob");
  check_probability(solid_angle_fraction, "solid_angle_fraction");
  check_probability(detector_efficiency, "detector_efficiency");
  check_probability(decay_branching, "decay_branching");
  check_probability(polarization_mixing_error, "polarization_mixing_error");
  check_probability(double_excitation_error, "double_excitation_error");
  check_probability(spam_error, "spam_error");
}

double PhotonCollectionConfig::success_probability() const {
  return excitation_prob * decay_branching * solid_angle_fraction *
         detector_efficiency;
}

PhotonCollectionConfig PhotonCollectionConfig::without_errors() const {
  PhotonCollectionConfig c = *this;
  c.polarization_mixing_error = 0.0;
  c.double_excitation_error = 0.0;
  c.spam_error = 0.0;
  return c;
}

qsim::HilbertSpec pair_spec() {
  return qsim::HilbertSpec({qsim::Subsystem::qubit(), qsim::Subsystem::qubit()});
}

Vector ideal_pair() {
  Vector v = Vector::Zero(4);
  v(0) = v(3) = 1.0 / std::sqrt(2.0);
  return v;
}

QuantumState heralded_state(const PhotonCollectionConfig& config) {
  config.validate();
  QuantumState s = QuantumState::pure(pair_spec(), ideal_pair());
  if (config.polarization_mixing_error > 0.0)
    s = qsim::apply_channel(s, qsim::depolarizing(config.polarization_mixing_error),
                            {1});
  if (config.double_excitation_error > 0.0)
    s = qsim::apply_channel(
        s, qsim::dephasing(1.0 - config.double_excitation_error), {0});
  if (config.spam_error > 0.0)
    s = qsim::apply_channel(s, qsim::bit_flip(config.spam_error), {0});
  return s;
}

HeraldedPair attempt_entanglement(const PhotonCollectionConfig& config, Rng& rng) {
  config.validate();
  HeraldedPair out;
  out.attempts = 1;
  out.herald = rng.bernoulli(config.success_probability());
  if (out.herald) out.state = heralded_state(config);
  return out;
}

HeraldedPair entangle_until_herald(const PhotonCollectionConfig& config,
                                   Rng& rng, std::uint64_t max_attempts) {
  config.validate();
  HeraldedPair out;
  const double p = config.success_probability();
  if (p <= 0.0 || max_attempts == 0) {
    out.attempts = max_attempts;
    return out;
  }
  const std::uint64_t n = rng.geometric_trials(p);
  if (n > max_attempts) {
    out.attempts = max_attempts;
    return out;
  }
  out.attempts = n;
  out.herald = true;
  out.state = heralded_state(config);
  return out;
}

Matrix hwp_matrix(double angle) {
  const double c = std::cos(2.0 * angle);
  const double s = std::sin(2.0 * angle);
  Matrix m(2, 2);
  m << c, s, s, -c;
  return m;
}

double reduce_hwp_angle(double angle) {
  double r = std::fmod(angle, constants::pi);
  if (r < 0.0) r += constants::pi;
  return r;
}

QuantumState hwp(const QuantumState& state, std::size_t photon, double angle) {
  return qsim::apply_unitary(state, hwp_matrix(reduce_hwp_angle(angle)), {photon});
}

PbsOutcome pbs_measure(const QuantumState& state, std::size_t photon, Rng& rng) {
  if (photon >= state.spec().size()) throw DimensionError("photon index out of range");
  auto m = qsim::sample_measurement(
      state, qsim::basis_projectors(state.spec(), photon), rng);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < state.spec().size(); ++i)
    if (i != photon) keep.push_back(i);
  return {static_cast<int>(m.outcome), m.probability,
          qsim::partial_trace(m.post_state, keep)};
}

std::vector<AnalysisBasis> standard_bases() {
  return {{"z", 0.0, std::nullopt}, {"x", constants::pi / 8.0, constants::pi / 2.0}};
}

ConditionalProbabilities analyze(const QuantumState& pair,
                                 const AnalysisBasis& basis) {
  if (pair.spec() != pair_spec()) throw DimensionError("expected an atom-photon pair");
  QuantumState s = hwp(pair, 1, basis.hwp_angle);
  if (basis.pulse_phase)
    s = qsim::apply_unitary(
        s, qsim::ops::rotation(constants::pi / 2.0, *basis.pulse_phase), {0});
  // Joint probabilities P(atom a, photon p) at index 2a + p.
  std::array<double, 4> joint{};
  for (int k = 0; k < 4; ++k) joint[static_cast<std::size_t>(k)] = std::max(0.0, s.rho()(k, k).real());
  ConditionalProbabilities out;
  const double p_h = joint[0] + joint[2];
  const double p_v = joint[1] + joint[3];
  out.p_h = p_h / (p_h + p_v);
  out.p_up_given_h = p_h > 0.0 ? joint[2] / p_h : 0.0;
  out.p_up_given_v = p_v > 0.0 ? joint[3] / p_v : 0.0;
  return out;
}

CorrelationTable correlation_experiment(
    const PhotonCollectionConfig& config,
    const std::vector<AnalysisBasis>& bases, std::uint64_t heralds_per_basis,
    const detection::BaDetectionConfig& readout, Rng& rng) {
  if (heralds_per_basis == 0) throw ConfigError("correlation experiment needs shots > 0");
  readout.validate();
  const QuantumState pair = heralded_state(config);
  const double p_success = config.success_probability();
  if (p_success <= 0.0) throw NoDataError("herald probability is zero");
  CorrelationTable table;
  for (const auto& basis : bases) {
    const auto probs = analyze(pair, basis);
    CorrelationRow row;
    row.basis = basis;
    detection::CycleTally tally_h, tally_v;
    std::uint64_t shots_h = 0, shots_v = 0;
    for (std::uint64_t k = 0; k < heralds_per_basis; ++k) {
      table.attempts += rng.geometric_trials(p_success);
      ++table.heralds;
      const bool h = rng.bernoulli(probs.p_h);
      const double p_up = h ? probs.p_up_given_h : probs.p_up_given_v;
      std::uint64_t& shots = h ? shots_h : shots_v;
      detection::CycleTally& tally = h ? tally_h : tally_v;
      const auto pol = shots % 2 == 0 ? detection::Polarization::sigma_plus
                                      : detection::Polarization::sigma_minus;
      const int level = rng.bernoulli(p_up) ? 1 : 0;
      const auto shot = detection::ba_detection_shot(level, pol, readout, rng);
      if (pol == detection::Polarization::sigma_plus)
        tally.n_sigma_plus += shot.photons;
      else
        tally.n_sigma_minus += shot.photons;
      ++shots;
      (h ? row.heralds_h : row.heralds_v) += 1;
    }
    tally_h.shots = shots_h / 2;
    tally_v.shots = shots_v / 2;
    row.up_given_h = detection::estimate_population(tally_h);
    row.up_given_v = detection::estimate_population(tally_v);
    table.rows.push_back(std::move(row));
  }
  return table;
}

double fidelity_bound(const ConditionalProbabilities& z,
                      const ConditionalProbabilities& x) {
  const double p_v = 1.0 - z.p_h;
  const double down_h = z.p_h * (1.0 - z.p_up_given_h);
  const double up_h = z.p_h * z.p_up_given_h;
  const double down_v = p_v * (1.0 - z.p_up_given_v);
  const double up_v = p_v * z.p_up_given_v;
  const double e_x = x.p_h * (2.0 * x.p_up_given_h - 1.0) +
                     (1.0 - x.p_h) * (1.0 - 2.0 * x.p_up_given_v);
  return 0.5 * (down_h + up_v) + 0.5 * e_x - std::sqrt(down_v * up_h);
}

double fidelity_bound(const CorrelationTable& table) {
  const CorrelationRow* z = nullptr;
  const CorrelationRow* x = nullptr;
  for (const auto& row : table.rows) {
    if (row.basis.name == "z") z = &row;
    if (row.basis.name == "x") x = &row;
  }
  if (!z || !x) throw NoDataError("fidelity bound needs rows named z and x");
  auto to_probs = [](const CorrelationRow& r) {
    ConditionalProbabilities c;
    c.p_h = static_cast<double>(r.heralds_h) /
            static_cast<double>(r.heralds_h + r.heralds_v);
    c.p_up_given_h = r.up_given_h.p_up;
    c.p_up_given_v = r.up_given_v.p_up;
    return c;
  };
  return fidelity_bound(to_probs(*z), to_probs(*x));
}

double fidelity_bound(const QuantumState& pair) {
  const auto bases = standard_bases();
  return fidelity_bound(analyze(pair, bases[0]), analyze(pair, bases[1]));
}

Vector psi_plus() {
  Vector v = Vector::Zero(4);
  v(1) = v(2) = 1.0 / std::sqrt(2.0);
  return v;
}

Vector psi_minus() {
  Vector v = psi_plus();
  v(2) = -v(2);
  return v;
}

BsaDistribution bell_state_analyzer(const QuantumState& pair_a,
                                    const QuantumState& pair_b,
                                    double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw ConfigError("BSA visibility must be in [0, 1]");
  if (pair_a.spec() != pair_spec() || pair_b.spec() != pair_spec())
    throw DimensionError("BSA inputs must be atom-photon pairs");
  // [atom_a, photon_a, atom_b, photon_b]
  const QuantumState joint = qsim::tensor(pair_a, pair_b);
  const Matrix coincidence =
      0.5 * (projector(basis_vector(4, 1)) + projector(basis_vector(4, 2)));
  const Matrix e_plus = visibility * projector(psi_plus()) + (1.0 - visibility) * coincidence;
  const Matrix e_minus = visibility * projector(psi_minus()) + (1.0 - visibility) * coincidence;
  const Matrix e_none = Matrix::Identity(4, 4) - e_plus - e_minus;

  auto condition = [&](const Matrix& e, double& p) {
    const auto full = qsim::embed(e, joint.spec(), {1, 3});
    const Matrix weighted = full * joint.rho();
    p = std::max(0.0, weighted.trace().real());
    QuantumState reduced =
        qsim::partial_trace(QuantumState(joint.spec(), weighted), {0, 2});
    if (p <= 1e-15) return QuantumState::maximally_mixed(reduced.spec());
    Matrix rho = reduced.rho() / p;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return QuantumState(reduced.spec(), rho);
  };
  double pp = 0, pm = 0, pn = 0;
  QuantumState sp = condition(e_plus, pp);
  QuantumState sm = condition(e_minus, pm);
  QuantumState sn = condition(e_none, pn);
  return {pp, pm, pn, std::move(sp), std::move(sm), std::move(sn)};
}

BsaResult bell_state_analyzer(const HeraldedPair& pair_a,
                              const HeraldedPair& pair_b, Rng& rng,
                              double visibility) {
  if (!pair_a.herald || !pair_b.herald || !pair_a.state || !pair_b.state)
    throw Error("BSA needs two heralded atom-photon pairs");
  auto d = bell_state_analyzer(*pair_a.state, *pair_b.state, visibility);
  const double u = rng.uniform();
  BsaResult r;
  if (u < d.p_psi_plus) {
    r = {BsaOutcome::psi_plus, d.p_psi_plus, std::move(d.atoms_psi_plus)};
  } else if (u < d.p_psi_plus + d.p_psi_minus) {
    r = {BsaOutcome::psi_minus, d.p_psi_minus, std::move(d.atoms_psi_minus)};
  } else {
    r.outcome = BsaOutcome::none;
    r.probability = d.p_none;
  }
  return r;
}

}  // namespace qionsim::photonics
