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

#include "qionsim/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace qionsim::qsim {

Subsystem Subsystem::fock(int n_max) {
  if (n_max < 1) throw ConfigError("Fock truncation n_max must be >= 1");
  return {Kind::fock, n_max};
}

HilbertSpec::HilbertSpec(std::vector<Subsystem> subsystems,
                         std::size_t dim_cap)
    : subsystems_(std::move(subsystems)) {
  dim_ = 1;
  for (const auto& s : subsystems_) {
    if (s.kind == Subsystem::Kind::fock && s.n_max < 1)
      throw ConfigError("Fock truncation n_max must be >= 1");
    dim_ *= static_cast<std::size_t>(s.dim());
    if (dim_ > dim_cap) {
      std::ostringstream msg;
      msg << "Hilbert space dimension exceeds cap " << dim_cap;
      throw DimensionError(msg.str());
    }
  }
}

std::vector<int> HilbertSpec::digits(std::size_t index) const {
  std::vector<int> d(subsystems_.size());
  for (std::size_t k = subsystems_.size(); k-- > 0;) {
    const auto n = static_cast<std::size_t>(subsystems_[k].dim());
    d[k] = static_cast<int>(index % n);
    index /= n;
  }
  return d;
}

std::size_t HilbertSpec::index(const std::vector<int>& digits) const {
  if (digits.size() != subsystems_.size())
    throw DimensionError("digit count does not match subsystem count");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < subsystems_.size(); ++k) {
    if (digits[k] < 0 || digits[k] >= subsystems_[k].dim())
      throw DimensionError("basis level out of range");
    idx = idx * static_cast<std::size_t>(subsystems_[k].dim()) +
          static_cast<std::size_t>(digits[k]);
  }
  return idx;
}

std::string HilbertSpec::basis_label(std::size_t index) const {
  const auto d = digits(index);
  std::string s = "|";
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(d[k]);
  }
  return s + ">";
}

HilbertSpec HilbertSpec::subspec(const std::vector<std::size_t>& keep) const {
  std::vector<Subsystem> out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (i > 0 && keep[i] <= keep[i - 1])
      throw DimensionError("subsystem list must be strictly ascending");
    out.push_back(subsystems_.at(keep[i]));
  }
  return HilbertSpec(std::move(out));
}

QuantumState::QuantumState(HilbertSpec spec, Matrix rho)
    : spec_(std::move(spec)), rho_(std::move(rho)) {
  const auto d = static_cast<Eigen::Index>(spec_.dim());
  if (rho_.rows() != d || rho_.cols() != d)
    throw DimensionError("density matrix size does not match Hilbert space");
}

QuantumState QuantumState::pure(HilbertSpec spec, const Vector& psi) {
  if (psi.size() != static_cast<Eigen::Index>(spec.dim()))
    throw DimensionError("state vector size does not match Hilbert space");
  const double n = psi.norm();
  if (!(n > 0.0)) throw Error("zero state vector");
  const Vector v = psi / n;
  return QuantumState(std::move(spec), v * v.adjoint());
}

QuantumState QuantumState::basis(HilbertSpec spec,
                                 const std::vector<int>& levels) {
  const std::size_t idx = spec.index(levels);
  Matrix rho = Matrix::Zero(static_cast<Eigen::Index>(spec.dim()),
                            static_cast<Eigen::Index>(spec.dim()));
  rho(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(idx)) = 1.0;
  return QuantumState(std::move(spec), std::move(rho));
}

QuantumState QuantumState::maximally_mixed(HilbertSpec spec) {
  const auto d = static_cast<Eigen::Index>(spec.dim());
  Matrix rho = Matrix::Identity(d, d) / static_cast<double>(d);
  return QuantumState(std::move(spec), std::move(rho));
}

double QuantumState::purity() const {
  return (rho_ * rho_).trace().real();
}

double QuantumState::min_eigenvalue() const {
  const Matrix h = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void QuantumState::validate(double tol) const {
  const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > tol) throw Error("density matrix is not Hermitian");
  if (std::abs(trace() - 1.0) > tol) throw Error("density matrix trace != 1");
  if (min_eigenvalue() < -tol)
    throw Error("density matrix is not positive semidefinite");
}

HilbertSpec tensor(const HilbertSpec& a, const HilbertSpec& b) {
  auto subs = a.subsystems();
  subs.insert(subs.end(), b.subsystems().begin(), b.subsystems().end());
  return HilbertSpec(std::move(subs));
}

QuantumState tensor(const QuantumState& a, const QuantumState& b) {
  const auto da = a.rho().rows();
  const auto db = b.rho().rows();
  Matrix rho(da * db, da * db);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index j = 0; j < da; ++j)
      rho.block(i * db, j * db, db, db) = a.rho()(i, j) * b.rho();
  return QuantumState(tensor(a.spec(), b.spec()), std::move(rho));
}

SparseMatrix embed(const Matrix& op, const HilbertSpec& spec,
                   const std::vector<std::size_t>& targets) {
  std::size_t op_dim = 1;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= spec.size())
      throw DimensionError("target subsystem out of range");
    for (std::size_t j = 0; j < i; ++j)
      if (targets[j] == targets[i])
        throw DimensionError("duplicate target subsystem");
    op_dim *= spec.dim(targets[i]);
  }
  if (op.rows() != static_cast<Eigen::Index>(op_dim) ||
      op.cols() != static_cast<Eigen::Index>(op_dim))
    throw DimensionError("operator size does not match target subsystems");

  const std::size_t d = spec.dim();
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(d * op_dim);
  std::vector<int> tdims(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i)
    tdims[i] = static_cast<int>(spec.dim(targets[i]));

  for (std::size_t col = 0; col < d; ++col) {
    auto dig = spec.digits(col);
    std::size_t op_col = 0;
    for (std::size_t i = 0; i < targets.size(); ++i)
      op_col = op_col * static_cast<std::size_t>(tdims[i]) +
               static_cast<std::size_t>(dig[targets[i]]);
    for (std::size_t op_row = 0; op_row < op_dim; ++op_row) {
      const Complex v = op(static_cast<Eigen::Index>(op_row),
                           static_cast<Eigen::Index>(op_col));
      if (v == Complex(0.0)) continue;
      std::size_t rem = op_row;
      for (std::size_t i = targets.size(); i-- > 0;) {
        dig[targets[i]] = static_cast<int>(rem % static_cast<std::size_t>(tdims[i]));
        rem /= static_cast<std::size_t>(tdims[i]);
      }
      trips.emplace_back(static_cast<int>(spec.index(dig)),
                         static_cast<int>(col), v);
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

bool is_unitary(const Matrix& u, double tol) {
  if (u.rows() != u.cols()) return false;
  const Matrix e = u.adjoint() * u - Matrix::Identity(u.rows(), u.cols());
  return e.cwiseAbs().maxCoeff() <= tol;
}

QuantumState apply_unitary(const QuantumState& state, const Matrix& unitary,
                           const std::vector<std::size_t>& targets) {
  if (!is_unitary(unitary)) throw Error("operator is not unitary to 1e-10");
  return apply_unitary(state, embed(unitary, state.spec(), targets));
}

QuantumState apply_unitary(const QuantumState& state,
                           const SparseMatrix& unitary) {
  if (unitary.rows() != state.rho().rows())
    throw DimensionError("unitary size does not match state");
  const Matrix left = unitary * state.rho();
  Matrix rho = (unitary * left.adjoint()).adjoint();
  return QuantumState(state.spec(), std::move(rho));
}

Channel::Channel(std::vector<Matrix> kraus, double tol)
    : kraus_(std::move(kraus)) {
  if (kraus_.empty()) throw Error("channel needs at least one Kraus operator");
  const auto d = kraus_.front().cols();
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& k : kraus_) {
    if (k.rows() != d || k.cols() != d)
      throw DimensionError("Kraus operators must share one square shape");
    sum += k.adjoint() * k;
  }
  if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > tol)
    throw Error("Kraus operators are not complete");
}

QuantumState apply_channel(const QuantumState& state, const Channel& channel,
                           const std::vector<std::size_t>& targets) {
  const auto d = state.rho().rows();
  Matrix out = Matrix::Zero(d, d);
  for (const auto& k : channel.kraus()) {
    const SparseMatrix full = embed(k, state.spec(), targets);
    const Matrix left = full * state.rho();
    out += (full * left.adjoint()).adjoint();
  }
  return QuantumState(state.spec(), std::move(out));
}

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError(std::string(what) + " must be in [0, 1]");
}

}  // namespace

Channel depolarizing(double p, int dim) {
  check_probability(p, "depolarizing probability");
  // Weyl (clock and shift) operators form a unitary error basis for any d.
  std::vector<Matrix> kraus;
  const double d = static_cast<double>(dim);
  kraus.push_back(std::sqrt(1.0 - p + p / (d * d)) * ops::identity(dim));
  if (p > 0.0) {
    Matrix shift = Matrix::Zero(dim, dim);
    Matrix clock = Matrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
      shift((k + 1) % dim, k) = 1.0;
      clock(k, k) = std::polar(1.0, constants::two_pi * k / d);
    }
    Matrix xa = ops::identity(dim);
    for (int a = 0; a < dim; ++a) {
      Matrix zb = ops::identity(dim);
      for (int b = 0; b < dim; ++b) {
        if (a || b) kraus.push_back(std::sqrt(p) / d * (xa * zb));
        zb = zb * clock;
      }
      xa = xa * shift;
    }
  }
  return Channel(std::move(kraus));
}

Channel dephasing(double coherence) {
  check_probability(coherence, "dephasing coherence factor");
  return Channel({std::sqrt(0.5 * (1.0 + coherence)) * ops::identity(2),
                  std::sqrt(0.5 * (1.0 - coherence)) * ops::sigma_z()});
}

Channel bit_flip(double p) {
  check_probability(p, "bit-flip probability");
  return Channel(
      {std::sqrt(1.0 - p) * ops::identity(2), std::sqrt(p) * ops::sigma_x()});
}

QuantumState partial_trace(const QuantumState& state,
                           const std::vector<std::size_t>& keep) {
  const HilbertSpec& spec = state.spec();
  const HilbertSpec out_spec = spec.subspec(keep);
  std::vector<bool> kept(spec.size(), false);
  for (auto k : keep) kept.at(k) = true;

  const std::size_t d = spec.dim();
  const std::size_t dk = out_spec.dim();
  // Map each full index to (kept index, traced index).
  std::vector<std::size_t> kidx(d), tidx(d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto dig = spec.digits(i);
    std::size_t a = 0, b = 0;
    for (std::size_t s = 0; s < spec.size(); ++s) {
      const auto n = spec.dim(s);
      if (kept[s])
        a = a * n + static_cast<std::size_t>(dig[s]);
      else
        b = b * n + static_cast<std::size_t>(dig[s]);
    }
    kidx[i] = a;
    tidx[i] = b;
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk),
                            static_cast<Eigen::Index>(dk));
  const Matrix& rho = state.rho();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (tidx[i] == tidx[j])
        out(static_cast<Eigen::Index>(kidx[i]),
            static_cast<Eigen::Index>(kidx[j])) +=
            rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return QuantumState(out_spec, std::move(out));
}

namespace ops {

Matrix identity(int dim) { return Matrix::Identity(dim, dim); }

Matrix sigma_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Matrix sigma_y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

Matrix sigma_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Matrix sigma_plus() {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

Matrix annihilation(int n_max) {
  Matrix a = Matrix::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Matrix number(int n_max) {
  Matrix m = Matrix::Zero(n_max + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n) m(n, n) = static_cast<double>(n);
  return m;
}

Matrix rotation(double theta, double phi) {
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  const Complex i(0.0, 1.0);
  Matrix m(2, 2);
  m << c, -i * s * std::exp(-i * phi), -i * s * std::exp(i * phi), c;
  return m;
}

Matrix rz(double theta) {
  const Complex i(0.0, 1.0);
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = std::exp(-0.5 * i * theta);
  m(1, 1) = std::exp(0.5 * i * theta);
  return m;
}

}  // namespace ops

ThermalResult thermal_state(double nbar, int n_max) {
  if (!(nbar >= 0.0)) throw ConfigError("mean phonon number must be >= 0");
  const HilbertSpec spec({Subsystem::fock(n_max)});
  const double x = nbar / (1.0 + nbar);
  Matrix rho = Matrix::Zero(n_max + 1, n_max + 1);
  double total = 0.0;
  double term = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    rho(n, n) = term;
    total += term;
    term *= x;
  }
  rho /= total;
  ThermalResult out{QuantumState(spec, std::move(rho)),
                    std::pow(x, n_max + 1), {}};
  if (out.truncated_mass > 1e-3) {
    std::ostringstream msg;
    msg << "thermal state nbar=" << nbar << " truncated at n_max=" << n_max
        << " drops probability " << out.truncated_mass;
    out.warnings.push_back(msg.str());
  }
  return out;
}

namespace {

struct PreparedGenerator {
  std::vector<SparseMatrix> h_ops;
  std::vector<std::function<Complex(double)>> h_coeff;
  std::vector<SparseMatrix> jumps;
  std::vector<SparseMatrix> jumps_dag;
  SparseMatrix loss;  // 1/2 sum L^dag L
};

// Right-hand side assuming a Hermitian rho (true for every RK4 stage here).
Matrix rhs(const PreparedGenerator& g, double t, const Matrix& rho) {
  const auto d = rho.rows();
  Matrix h_rho = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < g.h_ops.size(); ++k) {
    const Complex c = g.h_coeff[k] ? g.h_coeff[k](t) : Complex(1.0);
    h_rho.noalias() += c * (g.h_ops[k] * rho);
  }
  const Complex i(0.0, 1.0);
  Matrix out = -i * (h_rho - h_rho.adjoint());
  if (!g.jumps.empty()) {
    const Matrix lr = g.loss * rho;
    out -= lr + lr.adjoint();
    for (std::size_t k = 0; k < g.jumps.size(); ++k) {
      const Matrix left = g.jumps[k] * rho;
      out.noalias() += g.jumps[k] * left.adjoint();
    }
  }
  return out;
}

Matrix integrate(const PreparedGenerator& g, const Matrix& rho0, double t0,
                 double duration, std::size_t steps) {
  Matrix rho = rho0;
  const double dt = duration / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = t0 + dt * static_cast<double>(s);
    const Matrix k1 = rhs(g, t, rho);
    const Matrix k2 = rhs(g, t + 0.5 * dt, rho + 0.5 * dt * k1);
    const Matrix k3 = rhs(g, t + 0.5 * dt, rho + 0.5 * dt * k2);
    const Matrix k4 = rhs(g, t + dt, rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // rhs() drops the anti-Hermitian part's dynamics; jump terms would
    // amplify rounding residue there, so project back every step.
    rho = 0.5 * (rho + rho.adjoint()).eval();
  }
  return rho;
}

}  // namespace

double trace_distance_norm(const Matrix& a, const Matrix& b) {
  const Matrix diff = a - b;
  const Matrix h = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

QuantumState evolve(const QuantumState& state, const LindbladGenerator& gen,
                    double t0, double duration,
                    const IntegratorOptions& options) {
  if (!(duration >= 0.0)) throw ConfigError("evolution duration must be >= 0");
  if (duration == 0.0 || (gen.hamiltonian.empty() && gen.jumps.empty()))
    return state;
  const auto d = state.rho().rows();
  PreparedGenerator g;
  for (const auto& term : gen.hamiltonian) {
    if (term.op.rows() != d) throw DimensionError("Hamiltonian size mismatch");
    g.h_ops.push_back(term.op);
    g.h_coeff.push_back(term.coefficient);
  }
  g.loss = SparseMatrix(d, d);
  for (const auto& l : gen.jumps) {
    if (l.rows() != d) throw DimensionError("jump operator size mismatch");
    g.jumps.push_back(l);
    SparseMatrix ld = l.adjoint();
    g.loss += 0.5 * (ld * l);
    g.jumps_dag.push_back(std::move(ld));
  }
  std::size_t steps = std::max<std::size_t>(options.initial_steps, 1);
  Matrix coarse = integrate(g, state.rho(), t0, duration, steps);
  while (true) {
    steps *= 2;
    if (steps > options.max_steps)
      throw ConvergenceError("Lindblad integrator hit the step-count floor");
    Matrix fine = integrate(g, state.rho(), t0, duration, steps);
    if (trace_distance_norm(fine, coarse) < options.tolerance)
      return QuantumState(state.spec(), std::move(fine));
    coarse = std::move(fine);
  }
}

QuantumState apply_heating(const QuantumState& state, std::size_t mode,
                           double rate_per_ms, double duration_ms,
                           const IntegratorOptions& options) {
  if (!(rate_per_ms >= 0.0)) throw ConfigError("heating rate must be >= 0");
  if (!(duration_ms >= 0.0)) throw ConfigError("heating duration must be >= 0");
  const Subsystem& sub = state.spec().at(mode);
  if (sub.kind != Subsystem::Kind::fock)
    throw DimensionError("heating target is not a motional mode");
  if (rate_per_ms == 0.0 || duration_ms == 0.0) return state;
  const Matrix a = std::sqrt(rate_per_ms) * ops::annihilation(sub.n_max);
  LindbladGenerator gen;
  gen.jumps.push_back(embed(a, state.spec(), {mode}));
  gen.jumps.push_back(embed(a.adjoint(), state.spec(), {mode}));
  return evolve(state, gen, 0.0, duration_ms, options);
}

void check_projectors(const std::vector<Matrix>& projectors) {
  if (projectors.empty()) throw Error("empty projector set");
  const auto d = projectors.front().rows();
  Matrix sum = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < projectors.size(); ++i) {
    const Matrix& p = projectors[i];
    if (p.rows() != d || p.cols() != d)
      throw DimensionError("projector size mismatch");
    if ((p * p - p).cwiseAbs().maxCoeff() > 1e-10 ||
        (p - p.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
      throw Error("measurement operator is not an orthogonal projector");
    for (std::size_t j = 0; j < i; ++j)
      if ((p * projectors[j]).cwiseAbs().maxCoeff() > 1e-10)
        throw Error("projectors are not mutually orthogonal");
    sum += p;
  }
  if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
    throw Error("incomplete projector set");
}

std::vector<double> measure(const QuantumState& state,
                            const std::vector<Matrix>& projectors) {
  check_projectors(projectors);
  if (projectors.front().rows() != state.rho().rows())
    throw DimensionError("projector size does not match state");
  std::vector<double> p;
  double total = 0.0;
  for (const auto& proj : projectors) {
    double v = (proj * state.rho()).trace().real();
    if (v < 0.0) v = 0.0;
    p.push_back(v);
    total += v;
  }
  if (!(total > 0.0)) throw Error("state has zero trace");
  for (auto& v : p) v /= total;
  return p;
}

MeasurementOutcome sample_measurement(const QuantumState& state,
                                      const std::vector<Matrix>& projectors,
                                      Rng& rng) {
  const auto probs = measure(state, projectors);
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t k = 0;
  for (; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc && probs[k] > 0.0) break;
  }
  while (probs[k] <= 0.0 && k > 0) --k;
  const Matrix& p = projectors[k];
  Matrix rho = p * state.rho() * p;
  rho /= rho.trace().real();
  return {k, probs[k], QuantumState(state.spec(), std::move(rho))};
}

std::vector<Matrix> basis_projectors(const HilbertSpec& spec,
                                     std::size_t target) {
  const int n = static_cast<int>(spec.dim(target));
  std::vector<Matrix> out;
  for (int k = 0; k < n; ++k) {
    Matrix p = Matrix::Zero(n, n);
    p(k, k) = 1.0;
    out.emplace_back(Matrix(embed(p, spec, {target})));
  }
  return out;
}

std::vector<double> populations(const QuantumState& state, std::size_t target) {
  const HilbertSpec& spec = state.spec();
  std::vector<double> p(spec.dim(target), 0.0);
  for (std::size_t i = 0; i < spec.dim(); ++i) {
    const auto dig = spec.digits(i);
    p[static_cast<std::size_t>(dig[target])] +=
        state.rho()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))
            .real();
  }
  for (auto& v : p) v = std::max(v, 0.0);
  return p;
}

double fidelity(const QuantumState& state, const Vector& target) {
  if (target.size() != state.rho().rows())
    throw DimensionError("target state size does not match");
  const double n = target.norm();
  if (std::abs(n - 1.0) > 1e-9) throw Error("target state is not normalized");
  const double f = (target.adjoint() * state.rho() * target)(0, 0).real();
  return std::clamp(f, 0.0, 1.0);
}

double expectation(const QuantumState& state, const Matrix& full_op) {
  return (full_op * state.rho()).trace().real();
}

double mean_occupation(const QuantumState& state, std::size_t mode) {
  const auto p = populations(state, mode);
  double n = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) n += static_cast<double>(k) * p[k];
  return n;
}

void dump_state(std::ostream& out, const QuantumState& state) {
  const auto& spec = state.spec();
  out << "# subsystems:";
  for (const auto& s : spec.subsystems())
    out << (s.kind == Subsystem::Kind::qubit ? " qubit"
                                             : " fock(" + std::to_string(s.n_max) + ")");
  out << "\n# dim: " << spec.dim() << "\n# basis:";
  for (std::size_t i = 0; i < spec.dim(); ++i) out << ' ' << spec.basis_label(i);
  out << "\n";
  out << std::setprecision(12);
  for (Eigen::Index r = 0; r < state.rho().rows(); ++r) {
    for (Eigen::Index c = 0; c < state.rho().cols(); ++c) {
      const Complex v = state.rho()(r, c);
      out << (c ? " " : "") << v.real() << (v.imag() < 0 ? "-" : "+")
          << std::abs(v.imag()) << "i";
    }
    out << "\n";
  }
}

}  // namespace qionsim::qsim
