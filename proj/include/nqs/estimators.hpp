#pragma once

#include "nqs/ansatz.hpp"
#include "nqs/sampling.hpp"
#include "nqs/spin_model.hpp"

#include <Eigen/Dense>

#include <span>

namespace nqs {

/// log psi at arbitrary codes. When `table` is a full summation of the same
/// wave function the values are looked up rather than recomputed.
Eigen::VectorXcd log_psi_at(const Ansatz& psi, const SampleSet* table, std::span<const Code> codes);

/// sum_k w_k v_k
Complex weighted_mean(const Eigen::VectorXd& weights, const Eigen::VectorXcd& values);

/// E_loc(x) = sum_y H_{x,y} psi(y) / psi(x); amplitude ratios via log differences.
Complex local_energy(const Ansatz& psi, const TiltedIsingModel& model, const SpinConfiguration& x);

/// E_loc for every configuration of a sample set drawn from psi.
Eigen::VectorXcd local_energies(const Ansatz& psi, const TiltedIsingModel& model, const SampleSet& samples);

struct Observable {
  enum class Kind { sigma_z, sigma_x, energy };
  Kind kind = Kind::energy;
  int site = 1;  ///< 1-based, ignored for the energy

  static Observable sigma_z(int site) { return {Kind::sigma_z, site}; }
  static Observable sigma_x(int site) { return {Kind::sigma_x, site}; }
  static Observable energy() { return {Kind::energy, 1}; }
};

/// O(x) for diagonal observables, O_loc(x) for the off-diagonal ones.
Eigen::VectorXcd local_values(const Observable& observable, const SampleSet& samples, const Ansatz& psi,
                              const TiltedIsingModel& model);

Complex expectation(const Observable& observable, const SampleSet& samples, const Ansatz& psi,
                    const TiltedIsingModel& model);

/// X_{m,k} = sqrt(w_k) (conj(O_m(x_k)) - conj(<O_m>)), O_m = d ln psi / d theta_m.
/// With Monte Carlo weights 1/N_s this is the usual 1/sqrt(N_s) scaling.
struct XMatrix {
  Eigen::MatrixXcd entries;  ///< N_p x N_s

  Eigen::Index num_parameters() const { return entries.rows(); }
  Eigen::Index num_samples() const { return entries.cols(); }
  /// S = X X^dagger
  Eigen::MatrixXcd geometric_tensor() const;
};

XMatrix build_x_matrix(const SampleSet& samples, const Ansatz& psi);

/// f_k = sqrt(w_k) (v_k - <v>)
Eigen::VectorXcd centered_scaled(const SampleSet& samples, const Eigen::VectorXcd& local, Complex mean);

struct TvmcForce {
  XMatrix x;
  Eigen::VectorXcd f;      ///< centered scaled local energies
  Eigen::VectorXcd force;  ///< F = X f
  Complex energy;          ///< <E_loc>
};

TvmcForce tvmc_force(const SampleSet& samples, const Ansatz& psi, const TiltedIsingModel& model);

struct TemporalOverlapPair {
  Complex forward;   ///< E^U_{psi_t psi_t'}(x) = sum_x' U_{x x'} psi_t(x') / psi_t'(x)
  Complex backward;  ///< E^U_{psi_t' psi_t}(x) = sum_x' U^dagger_{x x'} psi_t'(x') / psi_t(x)
};

/// x' ranges over the 2^span configurations that agree with x outside the block.
TemporalOverlapPair local_temporal_overlaps(const Ansatz& psi_t, const Ansatz& psi_tp, const TrotterBlock& block,
                                            const SpinConfiguration& x);

/// Batched block overlap sum_x' M_{x x'} num(x') / den(x) for every code, where
/// the numerator wave function is looked up in `numerator_table` when it is a
/// full summation.
Eigen::VectorXcd block_overlaps(const Ansatz& numerator, const SampleSet* numerator_table,
                                const Eigen::MatrixXcd& block_matrix, const TrotterBlock& block,
                                std::span<const Code> codes, const Eigen::VectorXcd& denominator_log);

struct OverlapResult {
  Complex overlap;          ///< C^U, the weighted mean of E^U_loc
  Complex backward_mean;    ///< <E^U_{psi_t' psi_t}> over the psi_t samples
  Eigen::VectorXcd local;   ///< E^U_loc on the psi_t' samples
  XMatrix x;                ///< built from the psi_t' samples
  Eigen::VectorXcd f;       ///< centered scaled E^U_loc
  Eigen::VectorXcd force;   ///< F^U = X f^U = d C^U / d theta^*

  double infidelity() const { return 1.0 - overlap.real(); }
};

OverlapResult overlap_and_force(const SampleSet& psi_t_samples, const SampleSet& psi_tp_samples,
                                const Ansatz& psi_t, const Ansatz& psi_tp, const TrotterBlock& block);

}  // namespace nqs
