#include "nqs/sr_solvers.hpp"

#include "nqs/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nqs {

namespace {

double relative_residual(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& rhs, const Eigen::VectorXcd& delta,
                         double lambda) {
  const double norm = rhs.norm();
  if (norm == 0.0) return delta.norm();
  const Eigen::VectorXcd lhs = x * (x.adjoint() * delta) + lambda * delta;
  return (lhs - rhs).norm() / norm;
}

/// A^+ b for Hermitian positive semidefinite A, dropping eigenvalues below the cutoff.
Eigen::VectorXcd hermitian_pinv_solve(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b, SolverDiagnostics& diag) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(a);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition in the SR solve failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  const double cutoff = kPseudoInverseCutoff * top;
  Eigen::VectorXcd coeffs = eig.eigenvectors().adjoint() * b;
  Eigen::Index rank = 0;
  double smallest = top;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (top > 0.0 && values(i) > cutoff) {
      coeffs(i) /= values(i);
      ++rank;
      smallest = std::min(smallest, values(i));
    } else {
      coeffs(i) = 0.0;
    }
  }
  diag.rank = rank;
  diag.condition_estimate = rank > 0 ? top / smallest : 1.0;
  if (rank < values.size()) diag.fallback = true;
  return eig.eigenvectors() * coeffs;
}

/// Solves (A + shift) y = b for Hermitian A through Cholesky, falling back to
/// the pseudo-inverse when the factorization fails. `residual` evaluates
/// b - (A + shift) v from the factors of A; it drives two rounds of iterative
/// refinement, which recover the accuracy lost to forming A explicitly.
template <typename Residual>
Eigen::VectorXcd hermitian_solve(Eigen::MatrixXcd a, double shift, const Eigen::VectorXcd& b, SolverDiagnostics& diag,
                                 const Residual& residual) {
  a.diagonal().array() += shift;
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  if (llt.info() != Eigen::Success) {
    diag.fallback = true;
    return hermitian_pinv_solve(a, b, diag);
  }
  const Eigen::VectorXd d = llt.matrixLLT().diagonal().real();
  const double ratio = d.maxCoeff() / d.minCoeff();
  diag.condition_estimate = ratio * ratio;
  diag.rank = a.rows();
  Eigen::VectorXcd y = llt.solve(b);
  for (int round = 0; round < 2; ++round) y += llt.solve(residual(y));
  return y;
}

Eigen::MatrixXcd gram_rows(const Eigen::MatrixXcd& x) {  // X X^dagger
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(x.rows(), x.rows());
  s.selfadjointView<Eigen::Lower>().rankUpdate(x);
  return s.selfadjointView<Eigen::Lower>();
}

Eigen::MatrixXcd gram_cols(const Eigen::MatrixXcd& x) {  // X^dagger X
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(x.cols(), x.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(x.adjoint());
  return g.selfadjointView<Eigen::Lower>();
}

void check_shapes(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f) {
  if (x.cols() != f.size()) throw DimensionError("X has " + std::to_string(x.cols()) + " columns but f has " +
                                                 std::to_string(f.size()) + " entries");
}

}  // namespace

SolverMethod parse_solver_method(const std::string& name) {
  if (name == "direct") return SolverMethod::direct;
  if (name == "minsr") return SolverMethod::minsr;
  if (name == "kfac") return SolverMethod::kfac;
  throw ConfigError("unknown solver '" + name + "' (expected direct, minsr or kfac)");
}

std::string to_string(SolverMethod method) {
  switch (method) {
    case SolverMethod::direct: return "direct";
    case SolverMethod::minsr: return "minsr";
    case SolverMethod::kfac: return "kfac";
  }
  return "direct";
}

void validate_partition(const Partition& partition, Eigen::Index num_parameters) {
  std::vector<char> seen(static_cast<std::size_t>(num_parameters), 0);
  Eigen::Index covered = 0;
  for (const auto& block : partition) {
    if (block.empty()) throw ConfigError("K-FAC partition contains an empty block");
    for (auto i : block) {
      if (i < 0 || i >= num_parameters) throw ConfigError("K-FAC partition index out of range");
      if (seen[static_cast<std::size_t>(i)]) throw ConfigError("K-FAC partition blocks overlap");
      seen[static_cast<std::size_t>(i)] = 1;
      ++covered;
    }
  }
  if (covered != num_parameters) throw ConfigError("K-FAC partition does not cover every parameter");
}

SolveResult solve_direct(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f, double lambda) {
  check_shapes(x, f);
  if (!(lambda >= 0.0)) throw ConfigError("regularization must be non-negative");
  SolveResult out;
  const Eigen::VectorXcd rhs = x * f;
  if (lambda > 0.0) {
    // On the null space of X X^dagger the system is conditioned by |S| / lambda,
    // so the refinement residual (and X f itself) is accumulated in long double.
    using WideVector = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, 1>;
    const Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic> wide = x.cast<std::complex<long double>>();
    const WideVector wide_rhs = wide * f.cast<std::complex<long double>>();
    const auto residual = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
      const WideVector w = v.cast<std::complex<long double>>();
      const WideVector r = wide_rhs - wide * (wide.adjoint() * w) - static_cast<long double>(lambda) * w;
      return r.cast<Complex>();
    };
    out.update = hermitian_solve(gram_rows(x), lambda, wide_rhs.cast<Complex>(), out.diagnostics, residual);
  } else if (x.cols() < x.rows()) {
    // (X X^dagger)^+ X f = X (X^dagger X)^+ f
    out.update = x * hermitian_pinv_solve(gram_cols(x), f, out.diagnostics);
  } else {
    out.update = hermitian_pinv_solve(gram_rows(x), rhs, out.diagnostics);
  }
  out.diagnostics.residual_norm = relative_residual(x, rhs, out.update, lambda);
  return out;
}

SolveResult solve_minsr(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f, double lambda) {
  check_shapes(x, f);
  if (!(lambda > 0.0)) throw ConfigError("minSR needs a strictly positive regularization");
  SolveResult out;
  const auto residual = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
    return f - x.adjoint() * (x * v) - lambda * v;
  };
  out.update = x * hermitian_solve(gram_cols(x), lambda, f, out.diagnostics, residual);
  out.diagnostics.residual_norm = relative_residual(x, x * f, out.update, lambda);
  return out;
}

SolveResult solve_kfac(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f, double lambda,
                       const Partition& partition, std::size_t block_index) {
  check_shapes(x, f);
  if (block_index >= partition.size()) throw ConfigError("K-FAC block index out of range");
  const auto& rows = partition[block_index];
  for (auto i : rows) {
    if (i < 0 || i >= x.rows()) throw ConfigError("K-FAC partition index out of range");
  }
  const Eigen::MatrixXcd xb = x(rows, Eigen::all);
  SolveResult block = solve_direct(xb, f, lambda);
  SolveResult out;
  out.diagnostics = block.diagnostics;
  out.update = Eigen::VectorXcd::Zero(x.rows());
  out.update(rows) = block.update;
  return out;
}

SolveResult solve_sr(const SolverConfig& config, const Eigen::MatrixXcd& x, const Eigen::VectorXcd& f) {
  switch (config.method) {
    case SolverMethod::direct:
      return solve_direct(x, f, config.lambda);
    case SolverMethod::minsr:
      return solve_minsr(x, f, config.lambda);
    case SolverMethod::kfac: {
      validate_partition(config.kfac_partition, x.rows());
      SolveResult out;
      out.update = Eigen::VectorXcd::Zero(x.rows());
      for (std::size_t b = 0; b < config.kfac_partition.size(); ++b) {
        SolveResult block = solve_kfac(x, f, config.lambda, config.kfac_partition, b);
        out.update += block.update;
        out.diagnostics.residual_norm = std::max(out.diagnostics.residual_norm, block.diagnostics.residual_norm);
        out.diagnostics.condition_estimate = std::max(out.diagnostics.condition_estimate, block.diagnostics.condition_estimate);
        out.diagnostics.fallback = out.diagnostics.fallback || block.diagnostics.fallback;
        out.diagnostics.rank += block.diagnostics.rank;
      }
      return out;
    }
  }
  throw ConfigError("unknown solver method");
}

Partition kfac_partition_from_layers(const FnnShape& shape, std::span<const int> blocks_per_layer) {
  validate_shape(shape);
  const std::size_t layers = shape.layer_sizes.size() - 1;
  if (blocks_per_layer.size() != layers) {
    throw ConfigError("K-FAC spec has " + std::to_string(blocks_per_layer.size()) + " entries for " +
                      std::to_string(layers) + " layers");
  }
  Partition partition;
  Eigen::Index offset = 0;
  for (std::size_t k = 1; k <= layers; ++k) {
    const int outputs = shape.layer_sizes[k];
    const int inputs = shape.layer_sizes[k - 1];
    const int blocks = blocks_per_layer[k - 1];
    if (blocks < 1 || blocks > outputs) {
      throw ConfigError("layer " + std::to_string(k) + " cannot be split into " + std::to_string(blocks) + " blocks");
    }
    const Eigen::Index bias_offset = offset + static_cast<Eigen::Index>(outputs) * inputs;
    int node = 0;
    for (int b = 0; b < blocks; ++b) {
      const int count = outputs / blocks + (b < outputs % blocks ? 1 : 0);
      std::vector<Eigen::Index> block;
      block.reserve(static_cast<std::size_t>(count) * (inputs + 1));
      for (int i = node; i < node + count; ++i) {
        for (int j = 0; j < inputs; ++j) block.push_back(offset + static_cast<Eigen::Index>(i) * inputs + j);
      }
      for (int i = node; i < node + count; ++i) block.push_back(bias_offset + i);
      partition.push_back(std::move(block));
      node += count;
    }
    offset = bias_offset + outputs;
  }
  return partition;
}

Partition rbm_partition(const RbmShape& shape) {
  const Eigen::Index L = shape.num_sites;
  const Eigen::Index H = shape.num_hidden;
  Partition partition(3);
  for (Eigen::Index i = 0; i < L; ++i) partition[0].push_back(i);
  for (Eigen::Index i = 0; i < H; ++i) partition[1].push_back(L + i);
  for (Eigen::Index i = 0; i < H * L; ++i) partition[2].push_back(L + H + i);
  if (H == 0) partition.resize(1);
  return partition;
}

Partition single_block_partition(Eigen::Index num_parameters) {
  Partition partition(1);
  partition[0].resize(static_cast<std::size_t>(num_parameters));
  for (Eigen::Index i = 0; i < num_parameters; ++i) partition[0][static_cast<std::size_t>(i)] = i;
  return partition;
}

}  // namespace nqs
