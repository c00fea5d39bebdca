#pragma once

// Regularized stochastic-reconfiguration solves (X X^dagger + lambda) delta = X f
// in parameter space, in sample space (minSR) and block-diagonally (K-FAC).

#include "nqs/ansatz.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace nqs {

enum class SolverMethod { direct, minsr, kfac };

SolverMethod parse_solver_method(const std::string& name);
std::string to_string(SolverMethod method);

/// Ordered, disjoint parameter-index sets covering 0 .. N_p-1.
using Partition = std::vector<std::vector<Eigen::Index>>;

struct SolverConfig {
  SolverMethod method = SolverMethod::direct;
  double lambda = 1e-6;
  Partition kfac_partition;
};

/// Throws ConfigError unless the sets are disjoint and cover every index.
void validate_partition(const Partition& partition, Eigen::Index num_parameters);

struct SolverDiagnostics {
  double condition_estimate = 1.0;
  double residual_norm = 0.0;  ///< ||(XX^dagger + lambda) delta - X f|| / ||X f||
  bool fallback = false;       ///< pseudo-inverse used, or a factorization failed
  Eigen::Index rank = 0;
};

struct SolveResult {
  Eigen::VectorXcd update;
  SolverDiagnostics diagnostics;
};

/// Rank cutoff, relative to the largest eigenvalue, of the pseudo-inverse.
inline constexpr double kPseudoInverseCutoff = 1e-12;

/// delta = (X X^dagger + lambda 1_p)^{-1} X f. With lambda = 0 the minimum-norm
/// least-squares solution is returned through an eigendecomposition of the
/// smaller of X X^dagger and X^dagger X.
SolveResult solve_direct(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f, double lambda);

/// delta = X (X^dagger X + lambda 1_s)^{-1} f; requires lambda > 0.
SolveResult solve_minsr(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f, double lambda);

/// Update restricted to one block of the partition, zero elsewhere.
SolveResult solve_kfac(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f, double lambda,
                       const Partition& partition, std::size_t block_index);

/// Dispatch on the configured method. For K-FAC every block is solved against
/// the same X and f and the block updates are summed.
SolveResult solve_sr(const SolverConfig& config, const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f);

/// Layer-aligned K-FAC blocks of an FNN: layer k (W^[k] and b^[k]) is split
/// into blocks_per_layer[k-1] ranges of its output nodes; each block holds the
/// weight rows and bias entries of its nodes.
Partition kfac_partition_from_layers(const FnnShape& shape, std::span<const int> blocks_per_layer);

/// RBM blocks (a | b | W).
Partition rbm_partition(const RbmShape& shape);

Partition single_block_partition(Eigen::Index num_parameters);

}  // namespace nqs
