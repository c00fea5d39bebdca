#pragma once

// Dense state-vector reference: exact evolution by diagonalization, exact
// infidelities, time integration of series, and the amplitude/phase merits
// over the most probable configurations.

#include "nqs/ansatz.hpp"
#include "nqs/estimators.hpp"
#include "nqs/spin_model.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace nqs {

/// Largest chain for which a dense Hamiltonian is built.
inline constexpr int kMaxDenseSites = 14;

/// Amplitudes indexed by configuration code.
struct DenseState {
  int num_sites = 0;
  Eigen::VectorXcd amplitudes;

  static DenseState normalized(int num_sites, Eigen::VectorXcd amplitudes);
  Eigen::Index dimension() const { return amplitudes.size(); }
};

/// The normalized state vector of an ansatz (L <= 20).
DenseState nnqs_to_dense(const Ansatz& psi);

DenseState uniform_state(int num_sites);

/// H as a 2^L x 2^L real symmetric matrix; ResourceError beyond kMaxDenseSites.
Eigen::MatrixXd dense_hamiltonian(const TiltedIsingModel& model);

/// e^{-iHt} through one eigendecomposition of H.
class ExactPropagator {
 public:
  explicit ExactPropagator(const TiltedIsingModel& model);

  DenseState evolve(const DenseState& psi0, double t) const;
  const Eigen::VectorXd& energies() const { return energies_; }
  const Eigen::MatrixXd& eigenvectors() const { return vectors_; }

 private:
  int num_sites_;
  Eigen::VectorXd energies_;
  Eigen::MatrixXd vectors_;
};

DenseState exact_evolve(const TiltedIsingModel& model, const DenseState& psi0, double t);

/// 1 - |<a|b>|^2 / (<a|a><b|b>)
double infidelity(const DenseState& a, const DenseState& b);
double exact_infidelity(const Ansatz& psi, const DenseState& reference);

/// <O> in a dense state.
double dense_expectation(const DenseState& psi, const TiltedIsingModel& model, const Observable& observable);

/// Applies one Trotter block to a dense state in place.
void apply_block(DenseState& psi, const TrotterBlock& block);
/// Applies the full schedule, i.e. one step of length dt.
void apply_schedule(DenseState& psi, const TrotterSchedule& schedule);

/// Trapezoidal cumulative integral: out[0] = 0, out[n] = int_0^{n dt}.
std::vector<double> integrate_series(std::span<const double> values, double dt);

/// Codes sorted by decreasing probability, ties broken by increasing code,
/// truncated to n_max entries.
std::vector<Code> ranked_configurations(const DenseState& psi, std::size_t n_max);

/// Log-ratio above which the amplitude ratio is reported as overflowed.
inline constexpr double kRatioLogLimit = 700.0;

struct AmplitudePhase {
  double ratio = 0.0;           ///< |psi(x_M)| / |psi(y_n)|
  double phase_distance = 0.0;  ///< min(d, 2 pi - d), d = |Arg psi(x_M) - Arg psi(y_n)|
  bool overflow = false;        ///< ratio not representable; value set to +inf
};

/// Phase difference of two arguments in (-pi, pi], folded onto [0, pi].
double folded_phase_distance(double arg_a, double arg_b);

AmplitudePhase amplitude_ratio_and_phase_distance(const Ansatz& psi, Code x_m, Code y_n);
AmplitudePhase amplitude_ratio_and_phase_distance(const DenseState& psi, Code x_m, Code y_n);

}  // namespace nqs
