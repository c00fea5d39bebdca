#include "nqs/evolution.hpp"

#include "nqs/errors.hpp"
#include "nqs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>

namespace nqs {

namespace {

int step_count(double t_final, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(t_final >= 0.0)) throw ConfigError("final time must be non-negative");
  return static_cast<int>(std::llround(t_final / dt));
}

void keep_worst(SolverDiagnostics& into, const SolverDiagnostics& d) {
  into.residual_norm = std::max(into.residual_norm, d.residual_norm);
  into.condition_estimate = std::max(into.condition_estimate, d.condition_estimate);
  into.fallback = into.fallback || d.fallback;
  into.rank = std::max(into.rank, d.rank);
}

}  // namespace

std::uint64_t SeedStream::next() {
  // splitmix64 of (base, counter)
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * ++counter;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double LearningRateSchedule::at(int m) const { return initial * std::pow(decay, m / every); }

void validate(const PtvmcOptions& options) {
  if (!(options.epsilon > 0.0)) throw ConfigError("infidelity cutoff must be positive");
  if (options.max_steps < 1) throw ConfigError("need at least one optimization step per block");
  if (!(options.learning_rate.initial > 0.0)) throw ConfigError("learning rate must be positive");
  if (options.learning_rate.every < 1) throw ConfigError("learning-rate decay interval must be positive");
  if (!(options.dt >= 0.0)) throw ConfigError("time step must be non-negative");
}

BlockReport optimize_overlap(const Ansatz& target, Ansatz& trial, const TrotterBlock& block,
                             const PtvmcOptions& options, SeedStream& seeds) {
  validate(options);
  if (target.num_sites() != trial.num_sites()) throw DimensionError("target and trial disagree on L");
  BlockReport report;
  report.start = block.start;
  report.span = block.span;
  const SampleSet target_samples = draw_samples(target, options.sampler, seeds.next());
  for (int m = 1;; ++m) {
    const SampleSet trial_samples = draw_samples(trial, options.sampler, seeds.next());
    const OverlapResult r = overlap_and_force(target_samples, trial_samples, target, trial, block);
    const double estimate = r.infidelity();
    if (!std::isfinite(estimate)) throw NumericError("infidelity estimate is not finite");
    if (m == 1) report.initial_infidelity = std::max(estimate, 0.0);
    report.infidelity = std::max(estimate, 0.0);
    if (estimate <= options.epsilon) {
      report.converged = true;
      break;
    }
    if (m > options.max_steps) break;
    const SolveResult solve = solve_sr(options.solver, r.x.entries, r.f);
    if (!solve.update.allFinite()) throw NumericError("SR update is not finite");
    trial.set_parameters(trial.parameters() + options.learning_rate.at(m) * solve.update);
    report.solver = solve.diagnostics;
    report.steps = m;
  }
  return report;
}

BlockResult ptvmc_block_optimize(const Ansatz& psi_t, const TrotterBlock& block, const PtvmcOptions& options,
                                 SeedStream& seeds) {
  BlockResult out;
  out.state = psi_t.clone();
  out.report = optimize_overlap(psi_t, *out.state, block, options, seeds);
  return out;
}

StepReport ptvmc_step(std::unique_ptr<Ansatz>& psi, const TrotterSchedule& schedule, const PtvmcOptions& options,
                      SeedStream& seeds) {
  StepReport report;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    BlockResult result = ptvmc_block_optimize(*psi, schedule.at(i), options, seeds);
    report.infidelity_sum += result.report.infidelity;
    report.all_converged = report.all_converged && result.report.converged;
    report.blocks.push_back(result.report);
    psi = std::move(result.state);
  }
  return report;
}

Eigen::VectorXcd tvmc_derivative(const Ansatz& psi, const TiltedIsingModel& model, const SampleSet& samples,
                                 double lambda, SolverDiagnostics* diagnostics) {
  const TvmcForce force = tvmc_force(samples, psi, model);
  const SolveResult solve = solve_direct(force.x.entries, force.f, lambda);
  if (diagnostics != nullptr) *diagnostics = solve.diagnostics;
  if (!solve.update.allFinite()) throw NumericError("tVMC derivative is not finite");
  return Complex(0.0, -1.0) * solve.update;
}

void tvmc_rk4_step(Ansatz& psi, const TiltedIsingModel& model, double dt, const SamplerConfig& sampler, double lambda,
                   SeedStream& seeds, SolverDiagnostics* diagnostics) {
  if (!(dt >= 0.0)) throw ConfigError("time step must be non-negative");
  if (dt == 0.0) return;
  const Eigen::VectorXcd theta = psi.parameters();
  std::unique_ptr<Ansatz> stage = psi.clone();
  SolverDiagnostics worst;
  SolverDiagnostics d;
  const auto derivative = [&](const Eigen::VectorXcd& at) {
    stage->set_parameters(at);
    const SampleSet samples = draw_samples(*stage, sampler, seeds.next());
    Eigen::VectorXcd k = tvmc_derivative(*stage, model, samples, lambda, &d);
    keep_worst(worst, d);
    return k;
  };
  const Eigen::VectorXcd k1 = derivative(theta);
  const Eigen::VectorXcd k2 = derivative(theta + 0.5 * dt * k1);
  const Eigen::VectorXcd k3 = derivative(theta + 0.5 * dt * k2);
  const Eigen::VectorXcd k4 = derivative(theta + dt * k3);
  psi.set_parameters(theta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  if (diagnostics != nullptr) *diagnostics = worst;
}

int EvolutionRecord::unconverged_blocks() const {
  int count = 0;
  for (const auto& step : steps) {
    for (const auto& block : step.blocks) count += block.converged ? 0 : 1;
  }
  return count;
}

EvolutionRecord evolve_ptvmc(std::unique_ptr<Ansatz>& psi, const TiltedIsingModel& model, const PtvmcOptions& options,
                             double t_final, SeedStream& seeds, const StepCallback& callback, int first_step) {
  validate(options);
  const int total = step_count(t_final, options.dt);
  const TrotterSchedule schedule = trotter_schedule(model, options.block_span, options.dt);
  EvolutionRecord record;
  for (int n = first_step + 1; n <= total; ++n) {
    StepReport report = ptvmc_step(psi, schedule, options, seeds);
    report.index = n;
    report.t = n * options.dt;
    if (callback) callback(report, *psi);
    record.steps.push_back(std::move(report));
  }
  return record;
}

EvolutionRecord evolve_tvmc(Ansatz& psi, const TiltedIsingModel& model, const TvmcOptions& options, double t_final,
                            SeedStream& seeds, const StepCallback& callback, int first_step) {
  if (options.record_every < 1) throw ConfigError("record interval must be positive");
  const int total = step_count(t_final, options.dt);
  EvolutionRecord record;
  StepReport pending;
  for (int n = first_step + 1; n <= total; ++n) {
    SolverDiagnostics d;
    tvmc_rk4_step(psi, model, options.dt, options.sampler, options.lambda, seeds, &d);
    keep_worst(pending.tvmc_solver, d);
    if (n % options.record_every == 0 || n == total) {
      pending.index = n;
      pending.t = n * options.dt;
      if (callback) callback(pending, psi);
      record.steps.push_back(pending);
      pending = StepReport{};
    }
  }
  return record;
}

std::unique_ptr<Ansatz> prepare_initial_state(const AnsatzShape& shape, const FitOptions& options) {
  if (!(options.target_infidelity > 0.0)) throw ConfigError("fit target must be positive");
  std::unique_ptr<Ansatz> target = make_ansatz(shape);
  std::unique_ptr<Ansatz> trial;
  if (const auto* fnn = std::get_if<FnnShape>(&shape)) {
    trial = init_fnn_generic(*fnn, options.noise_scale, options.hidden, options.seed);
  } else {
    trial = init_near_uniform(shape, options.noise_scale, options.seed);
  }
  PtvmcOptions optimizer = options.optimizer;
  optimizer.epsilon = options.target_infidelity;
  SeedStream seeds{options.seed ^ 0x66697474ULL, 0};
  BlockReport report;
  try {
    report = optimize_overlap(*target, *trial, identity_block(), optimizer, seeds);
  } catch (const PreparationError&) {
    throw;
  } catch (const NumericError& e) {
    throw PreparationError(std::string("initial-state fit broke down: ") + e.what(),
                           std::numeric_limits<double>::infinity());
  }

  const int L = shape_sites(shape);
  const double final_infidelity =
      L <= kMaxEnumeratedSites ? std::max(exact_infidelity(*trial, uniform_state(L)), 0.0) : report.infidelity;
  if (!(final_infidelity <= options.target_infidelity)) {
    throw PreparationError("initial-state fit stopped at infidelity " + std::to_string(final_infidelity) +
                               " after " + std::to_string(report.steps) + " steps",
                           final_infidelity);
  }
  return trial;
}

}  // namespace nqs
