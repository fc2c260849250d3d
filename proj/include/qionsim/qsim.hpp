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

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qionsim/common.hpp"

namespace qionsim::qsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;

inline constexpr std::size_t kDefaultDimCap = 4096;
inline constexpr int kDefaultNMax = 10;

struct Subsystem {
  enum class Kind { qubit, fock };
  Kind kind = Kind::qubit;
  int n_max = 1;  // highest retained Fock level; fock only

  static Subsystem qubit() { return {Kind::qubit, 1}; }
  static Subsystem fock(int n_max);
  int dim() const { return kind == Kind::qubit ? 2 : n_max + 1; }
  friend bool operator==(const Subsystem&, const Subsystem&) = default;
};

// Ordered tensor-product structure. Basis index digits run with the first
// subsystem most significant.
class HilbertSpec {
 public:
  HilbertSpec() = default;
  explicit HilbertSpec(std::vector<Subsystem> subsystems,
                       std::size_t dim_cap = kDefaultDimCap);

  std::size_t size() const { return subsystems_.size(); }
  const Subsystem& at(std::size_t i) const { return subsystems_.at(i); }
  const std::vector<Subsystem>& subsystems() const { return subsystems_; }
  std::size_t dim() const { return dim_; }
  std::size_t dim(std::size_t i) const {
    return static_cast<std::size_t>(subsystems_.at(i).dim());
  }

  std::vector<int> digits(std::size_t index) const;
  std::size_t index(const std::vector<int>& digits) const;
  // e.g. "|1,0,3>"
  std::string basis_label(std::size_t index) const;
  // Keeps the listed subsystems (ascending order required).
  HilbertSpec subspec(const std::vector<std::size_t>& keep) const;

  friend bool operator==(const HilbertSpec& a, const HilbertSpec& b) {
    return a.subsystems_ == b.subsystems_;
  }

 private:
  std::vector<Subsystem> subsystems_;
  std::size_t dim_ = 1;
};

// Density matrix over a HilbertSpec. Value type; every operation returns a
// new state.
class QuantumState {
 public:
  QuantumState(HilbertSpec spec, Matrix rho);

  static QuantumState pure(HilbertSpec spec, const Vector& psi);
  // Product basis state with the given level per subsystem.
  static QuantumState basis(HilbertSpec spec, const std::vector<int>& levels);
  static QuantumState maximally_mixed(HilbertSpec spec);

  const HilbertSpec& spec() const { return spec_; }
  const Matrix& rho() const { return rho_; }
  std::size_t dim() const { return spec_.dim(); }

  double trace() const { return rho_.trace().real(); }
  double purity() const;
  double min_eigenvalue() const;
  // Throws Error if Hermiticity, unit trace or positivity fail at `tol`.
  void validate(double tol = 1e-9) const;

 private:
  HilbertSpec spec_;
  Matrix rho_;
};

QuantumState tensor(const QuantumState& a, const QuantumState& b);
HilbertSpec tensor(const HilbertSpec& a, const HilbertSpec& b);

// Lifts `op`, acting on `targets` (in that tensor order), to the full space.
SparseMatrix embed(const Matrix& op, const HilbertSpec& spec,
                   const std::vector<std::size_t>& targets);

bool is_unitary(const Matrix& u, double tol = 1e-10);

QuantumState apply_unitary(const QuantumState& state, const Matrix& unitary,
                           const std::vector<std::size_t>& targets);
// Full-space operator, already embedded; must be unitary.
QuantumState apply_unitary(const QuantumState& state,
                           const SparseMatrix& unitary);

// Kraus representation on a subsystem block.
class Channel {
 public:
  explicit Channel(std::vector<Matrix> kraus, double tol = 1e-10);
  const std::vector<Matrix>& kraus() const { return kraus_; }
  Eigen::Index dim() const { return kraus_.front().cols(); }

 private:
  std::vector<Matrix> kraus_;
};

QuantumState apply_channel(const QuantumState& state, const Channel& channel,
                           const std::vector<std::size_t>& targets);

// rho -> (1-p) rho + p I/d on a d-level block.
Channel depolarizing(double p, int dim = 2);
// Off-diagonal qubit elements scaled by `coherence` in [0, 1].
Channel dephasing(double coherence);
Channel bit_flip(double p);

// Partial trace down to `keep` (ascending subsystem indices).
QuantumState partial_trace(const QuantumState& state,
                           const std::vector<std::size_t>& keep);

namespace ops {
Matrix identity(int dim);
Matrix sigma_x();
Matrix sigma_y();
Matrix sigma_z();
// |1><0| in the {0, 1} qubit basis.
Matrix sigma_plus();
Matrix annihilation(int n_max);
Matrix number(int n_max);
// exp(-i theta/2 (cos phi X + sin phi Y)).
Matrix rotation(double theta, double phi);
// exp(-i theta/2 Z).
Matrix rz(double theta);
}  // namespace ops

struct ThermalResult {
  QuantumState state;
  double truncated_mass = 0.0;  // weight beyond n_max before renormalization
  std::vector<std::string> warnings;
};

ThermalResult thermal_state(double nbar, int n_max = kDefaultNMax);

// Term c(t) * op of a time-dependent Hamiltonian; an empty coefficient means
// a constant factor of 1.
struct HamiltonianTerm {
  SparseMatrix op;
  std::function<Complex(double)> coefficient;
};

// d rho/dt = -i[H(t), rho] + sum_k D[L_k] rho. Units are the caller's: H in
// rad per time unit, jump operators already scaled by sqrt(rate).
struct LindbladGenerator {
  std::vector<HamiltonianTerm> hamiltonian;
  std::vector<SparseMatrix> jumps;
};

// Fixed-step RK4; the step count doubles until two successive results differ
// by less than `tolerance` in trace norm.
struct IntegratorOptions {
  double tolerance = 1e-8;
  std::size_t initial_steps = 16;
  std::size_t max_steps = std::size_t{1} << 18;
};

QuantumState evolve(const QuantumState& state, const LindbladGenerator& gen,
                    double t0, double duration,
                    const IntegratorOptions& options = {});

// Infinite-temperature heating on a Fock subsystem: jump operators a and a^dag
// at equal rate so that d<n>/dt = rate (away from the truncation boundary).
// Rate in quanta per ms, duration in ms.
QuantumState apply_heating(const QuantumState& state, std::size_t mode,
                           double rate_per_ms, double duration_ms,
                           const IntegratorOptions& options = {});

// Checks completeness and orthogonality to 1e-10; throws Error otherwise.
void check_projectors(const std::vector<Matrix>& projectors);
// Probabilities for full-space projectors; clamped at 0, sum to 1.
std::vector<double> measure(const QuantumState& state,
                            const std::vector<Matrix>& projectors);

struct MeasurementOutcome {
  std::size_t outcome = 0;
  double probability = 0.0;
  QuantumState post_state;
};

MeasurementOutcome sample_measurement(const QuantumState& state,
                                      const std::vector<Matrix>& projectors,
                                      Rng& rng);

// Computational-basis projectors of one subsystem lifted to the full space.
std::vector<Matrix> basis_projectors(const HilbertSpec& spec,
                                     std::size_t target);
// Probability of each level of one subsystem.
std::vector<double> populations(const QuantumState& state, std::size_t target);

double fidelity(const QuantumState& state, const Vector& target);
double expectation(const QuantumState& state, const Matrix& full_op);
double mean_occupation(const QuantumState& state, std::size_t mode);

// Trace norm of a Hermitian matrix difference.
double trace_distance_norm(const Matrix& a, const Matrix& b);

// Text dump: basis labels then the matrix, one row per line.
void dump_state(std::ostream& out, const QuantumState& state);

}  // namespace qionsim::qsim
