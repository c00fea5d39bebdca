#pragma once

// Real-time evolution drivers: p-tVMC (per-block infidelity minimization over a
// Trotter schedule), tVMC (RK4 on the SR equation of motion), and the fit of
// the initial paramagnetic state.

#include "nqs/ansatz.hpp"
#include "nqs/estimators.hpp"
#include "nqs/sampling.hpp"
#include "nqs/spin_model.hpp"
#include "nqs/sr_solvers.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace nqs {

/// Counter-based seed source: the k-th draw depends only on (base, k), so a
/// run resumed from a checkpoint that stores the counter replays exactly.
struct SeedStream {
  std::uint64_t base = 0;
  std::uint64_t counter = 0;

  std::uint64_t next();
};

/// gamma(m) = initial * decay^floor(m / every)
struct LearningRateSchedule {
  double initial = 0.2;
  double decay = 0.8;
  int every = 400;

  double at(int m) const;
};

struct PtvmcOptions {
  double epsilon = 1e-5;
  int max_steps = 1000;
  LearningRateSchedule learning_rate;
  SamplerConfig sampler;
  SolverConfig solver;
  int block_span = 6;
  double dt = 0.1;
};

void validate(const PtvmcOptions& options);

struct BlockReport {
  int start = 1;
  int span = 2;
  double initial_infidelity = 0.0;  ///< estimate before the first update
  double infidelity = 0.0;          ///< max(last estimate, 0)
  int steps = 0;                    ///< parameter updates performed
  bool converged = false;           ///< reached epsilon within max_steps
  SolverDiagnostics solver;         ///< from the last update
};

/// Maximizes Re C^U between trial and U target, starting from the trial's
/// current parameters. Target samples are drawn once, trial samples at every
/// step; the learning-rate counter starts at 1 for every call.
BlockReport optimize_overlap(const Ansatz& target, Ansatz& trial, const TrotterBlock& block,
                             const PtvmcOptions& options, SeedStream& seeds);

struct BlockResult {
  std::unique_ptr<Ansatz> state;
  BlockReport report;
};

/// psi_t' warm-started from psi_t, then optimized against U psi_t.
BlockResult ptvmc_block_optimize(const Ansatz& psi_t, const TrotterBlock& block, const PtvmcOptions& options,
                                 SeedStream& seeds);

struct StepReport {
  int index = 0;  ///< step number; the state is at t = index * dt
  double t = 0.0;
  std::vector<BlockReport> blocks;
  double infidelity_sum = 0.0;  ///< sum over the blocks of this step
  bool all_converged = true;
  SolverDiagnostics tvmc_solver;  ///< worst residual over the RK4 stages (tVMC only)
};

/// One time step: every block of the schedule in order, replacing psi.
StepReport ptvmc_step(std::unique_ptr<Ansatz>& psi, const TrotterSchedule& schedule, const PtvmcOptions& options,
                      SeedStream& seeds);

/// d theta / dt = -i (S + lambda)^{-1} F; lambda = 0 uses the pseudo-inverse.
Eigen::VectorXcd tvmc_derivative(const Ansatz& psi, const TiltedIsingModel& model, const SampleSet& samples,
                                 double lambda, SolverDiagnostics* diagnostics = nullptr);

/// Classical RK4, resampling at every stage.
void tvmc_rk4_step(Ansatz& psi, const TiltedIsingModel& model, double dt, const SamplerConfig& sampler, double lambda,
                   SeedStream& seeds, SolverDiagnostics* diagnostics = nullptr);

struct TvmcOptions {
  double dt = 1e-3;
  double lambda = 0.0;
  SamplerConfig sampler;
  int record_every = 100;  ///< callback cadence in steps
};

struct EvolutionRecord {
  std::vector<StepReport> steps;

  int unconverged_blocks() const;
};

/// Called after every recorded step with the current state.
using StepCallback = std::function<void(const StepReport&, const Ansatz&)>;

/// Runs steps first_step+1 .. round(t_final / dt) of p-tVMC.
EvolutionRecord evolve_ptvmc(std::unique_ptr<Ansatz>& psi, const TiltedIsingModel& model, const PtvmcOptions& options,
                             double t_final, SeedStream& seeds, const StepCallback& callback = {}, int first_step = 0);

/// Runs steps first_step+1 .. round(t_final / dt) of tVMC; only steps that are
/// multiples of record_every are recorded.
EvolutionRecord evolve_tvmc(Ansatz& psi, const TiltedIsingModel& model, const TvmcOptions& options, double t_final,
                            SeedStream& seeds, const StepCallback& callback = {}, int first_step = 0);

struct FitOptions {
  double noise_scale = 0.01;
  HiddenScales hidden;  ///< FNN only
  std::uint64_t seed = 0;
  double target_infidelity = 1e-8;
  PtvmcOptions optimizer = [] {
    PtvmcOptions o;
    o.max_steps = 2000;
    return o;
  }();
};

/// Fits the uniform-amplitude state (the ground state of the field-only
/// Hamiltonian), starting from init_near_uniform for an RBM and from
/// init_fnn_generic for an FNN. Throws PreparationError when the exact
/// infidelity (or its estimate beyond 20 sites) stays above target or the
/// optimization breaks down.
std::unique_ptr<Ansatz> prepare_initial_state(const AnsatzShape& shape, const FitOptions& options);

}  // namespace nqs
