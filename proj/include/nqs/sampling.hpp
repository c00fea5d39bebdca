#pragma once

#include "nqs/ansatz.hpp"
#include "nqs/spin_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace nqs {

enum class SamplingMode { monte_carlo, full_summation };

/// Configurations distributed as |psi|^2 / Z, with their weights and cached
/// log-amplitudes. In full-summation mode column k is the configuration whose
/// code is k, so the set doubles as a lookup table of log psi.
struct SampleSet {
  SamplingMode mode = SamplingMode::monte_carlo;
  int num_sites = 0;
  std::vector<Code> codes;
  Eigen::MatrixXd spins;     ///< L x N, entries +-1
  Eigen::VectorXd weights;   ///< sums to one
  Eigen::VectorXcd log_psi;
  double acceptance_rate = 1.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(codes.size()); }
  bool empty() const { return codes.empty(); }
  SpinConfiguration configuration(Eigen::Index k) const {
    return SpinConfiguration::from_code(codes[static_cast<std::size_t>(k)], num_sites);
  }
};

struct MetropolisOptions {
  Eigen::Index n_samples = 10000;
  int n_chains = 16;
  /// Proposals discarded per chain; negative selects 10 L sweeps of L proposals.
  long burn_in = -1;
  /// Proposals between kept samples; non-positive selects one sweep (L).
  long thinning = 0;
  std::uint64_t seed = 0;
};

/// min(1, |psi(x')/psi(x)|^2) from the two log-amplitudes.
double metropolis_acceptance(Complex log_psi_proposal, Complex log_psi_current);

/// Single-spin-flip Metropolis-Hastings. Chains start from uniformly random
/// configurations, each with its own stream derived from (seed, chain), and
/// are advanced in lockstep so that their proposals are evaluated as a batch.
SampleSet metropolis_sample(const Ansatz& psi, const MetropolisOptions& options);

/// Largest chain enumerated exactly.
inline constexpr int kMaxEnumeratedSites = 20;

/// All 2^L configurations with their exact probabilities.
SampleSet full_summation(const Ansatz& psi);

struct SamplerConfig {
  SamplingMode mode = SamplingMode::full_summation;
  Eigen::Index n_samples = 10000;
  int n_chains = 16;
  long burn_in = -1;
  long thinning = 0;
};

/// Dispatches on the mode; the seed is ignored for full summation.
SampleSet draw_samples(const Ansatz& psi, const SamplerConfig& config, std::uint64_t seed);

}  // namespace nqs
