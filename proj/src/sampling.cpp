#include "nqs/sampling.hpp"

#include "nqs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nqs {

double metropolis_acceptance(Complex log_psi_proposal, Complex log_psi_current) {
  const double log_ratio = 2.0 * (log_psi_proposal - log_psi_current).real();
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

SampleSet metropolis_sample(const Ansatz& psi, const MetropolisOptions& options) {
  if (options.n_samples < 1) throw ConfigError("need at least one sample");
  if (options.n_chains < 1) throw ConfigError("need at least one chain");
  const int L = psi.num_sites();
  const long burn_in = options.burn_in < 0 ? 10L * L * L : options.burn_in;
  const long thinning = options.thinning <= 0 ? L : options.thinning;
  const int chains = options.n_chains;

  std::vector<long> quota(static_cast<std::size_t>(chains), options.n_samples / chains);
  for (long c = 0; c < options.n_samples % chains; ++c) ++quota[static_cast<std::size_t>(c)];
  const long max_quota = *std::max_element(quota.begin(), quota.end());

  std::vector<std::mt19937_64> rngs;
  rngs.reserve(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) {
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(c), 0x6e7173u};
    rngs.emplace_back(seq);
  }
  std::uniform_int_distribution<int> pick_site(0, L - 1);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Eigen::MatrixXd current(L, chains);
  for (int c = 0; c < chains; ++c) {
    auto& rng = rngs[static_cast<std::size_t>(c)];
    for (int l = 0; l < L; ++l) current(l, c) = (rng() & 1U) ? -1.0 : 1.0;
  }
  Eigen::VectorXcd current_log = psi.log_amplitudes(current);

  std::vector<std::vector<Code>> kept(static_cast<std::size_t>(chains));
  std::vector<std::vector<Complex>> kept_log(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) {
    kept[static_cast<std::size_t>(c)].reserve(static_cast<std::size_t>(quota[static_cast<std::size_t>(c)]));
    kept_log[static_cast<std::size_t>(c)].reserve(static_cast<std::size_t>(quota[static_cast<std::size_t>(c)]));
  }

  long accepted = 0;
  long proposed = 0;
  const long total_steps = burn_in + max_quota * thinning;
  Eigen::MatrixXd proposal(L, chains);
  std::vector<int> flipped(static_cast<std::size_t>(chains));
  for (long step = 1; step <= total_steps; ++step) {
    proposal = current;
    for (int c = 0; c < chains; ++c) {
      const int site = pick_site(rngs[static_cast<std::size_t>(c)]);
      flipped[static_cast<std::size_t>(c)] = site;
      proposal(site, c) = -proposal(site, c);
    }
    const Eigen::VectorXcd proposal_log = psi.log_amplitudes(proposal);
    for (int c = 0; c < chains; ++c) {
      const double u = uniform(rngs[static_cast<std::size_t>(c)]);
      if (u < metropolis_acceptance(proposal_log(c), current_log(c))) {
        const int site = flipped[static_cast<std::size_t>(c)];
        current(site, c) = -current(site, c);
        current_log(c) = proposal_log(c);
        if (step > burn_in) ++accepted;
      }
      if (step > burn_in) ++proposed;
    }
    if (step > burn_in && (step - burn_in) % thinning == 0) {
      const long index = (step - burn_in) / thinning;
      for (int c = 0; c < chains; ++c) {
        if (index <= quota[static_cast<std::size_t>(c)]) {
          kept[static_cast<std::size_t>(c)].push_back(code_of_column(current, c));
          kept_log[static_cast<std::size_t>(c)].push_back(current_log(c));
        }
      }
    }
  }

  SampleSet set;
  set.mode = SamplingMode::monte_carlo;
  set.num_sites = L;
  set.codes.reserve(static_cast<std::size_t>(options.n_samples));
  std::vector<Complex> logs;
  logs.reserve(static_cast<std::size_t>(options.n_samples));
  for (int c = 0; c < chains; ++c) {
    set.codes.insert(set.codes.end(), kept[static_cast<std::size_t>(c)].begin(), kept[static_cast<std::size_t>(c)].end());
    logs.insert(logs.end(), kept_log[static_cast<std::size_t>(c)].begin(), kept_log[static_cast<std::size_t>(c)].end());
  }
  set.spins = spins_from_codes(set.codes, L);
  set.log_psi = Eigen::Map<const Eigen::VectorXcd>(logs.data(), static_cast<Eigen::Index>(logs.size()));
  set.weights = Eigen::VectorXd::Constant(set.size(), 1.0 / static_cast<double>(set.size()));
  set.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 1.0;
  return set;
}

SampleSet full_summation(const Ansatz& psi) {
  const int L = psi.num_sites();
  if (L > kMaxEnumeratedSites) {
    throw ResourceError("full summation refused: L = " + std::to_string(L) + " exceeds " +
                        std::to_string(kMaxEnumeratedSites) + " sites");
  }
  const Code dim = Code{1} << L;
  SampleSet set;
  set.mode = SamplingMode::full_summation;
  set.num_sites = L;
  set.codes.resize(dim);
  for (Code k = 0; k < dim; ++k) set.codes[k] = k;
  set.spins = spins_from_codes(set.codes, L);
  set.log_psi = psi.log_amplitudes(set.spins);
  const double shift = set.log_psi.real().maxCoeff();
  set.weights = (2.0 * (set.log_psi.real().array() - shift)).exp().matrix();
  const double total = set.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericError("wave function has no finite nonzero amplitude");
  set.weights /= total;
  return set;
}

SampleSet draw_samples(const Ansatz& psi, const SamplerConfig& config, std::uint64_t seed) {
  if (config.mode == SamplingMode::full_summation) return full_summation(psi);
  MetropolisOptions options;
  options.n_samples = config.n_samples;
  options.n_chains = config.n_chains;
  options.burn_in = config.burn_in;
  options.thinning = config.thinning;
  options.seed = seed;
  return metropolis_sample(psi, options);
}

}  // namespace nqs
