#pragma once

// Quench experiments driven by a key = value configuration: preparation,
// evolution with per-step checkpoints, merit tables, replicate statistics.

#include "nqs/evolution.hpp"
#include "nqs/io.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nqs {

enum class Method { ptvmc, tvmc };
enum class OracleMode { automatic, on, off };

struct ExperimentConfig {
  // post-quench model; the pre-quench Hamiltonian is -initial_hx sum sigma^x
  int num_sites = 14;
  double coupling = 1.0;
  double field_x = 0.5;
  double field_z = 0.5;
  double initial_field_x = 1.0;

  std::string ansatz = "fnn";  ///< fnn | rbm
  std::vector<int> layers;     ///< empty: [L, 4L, 3L, 1]
  int alpha = 5;               ///< RBM hidden units per site

  Method method = Method::ptvmc;
  SamplerConfig sampler = [] {
    SamplerConfig s;
    s.mode = SamplingMode::monte_carlo;
    return s;
  }();
  std::uint64_t seed = 1;

  // p-tVMC
  double epsilon = 1e-5;
  int max_steps = 1000;
  LearningRateSchedule learning_rate;
  int block_span = 6;
  SolverMethod solver = SolverMethod::direct;
  std::vector<int> kfac_blocks;  ///< blocks per FNN layer; empty: one per layer

  // both methods; unset values take the method's default
  std::optional<double> dt;      ///< 0.1 (p-tVMC), 1e-3 (tVMC)
  std::optional<double> lambda;  ///< 1e-6 (p-tVMC), 0 (tVMC)
  double record_interval = 0.1;  ///< tVMC: time between recorded states

  // initial-state fit
  double init_noise = 0.01;
  HiddenScales hidden;
  double fit_target = 1e-8;
  int fit_max_steps = 2000;

  std::vector<int> ranks{2, 50, 500};
  double t_final = 2.0;
  int replicates = 10;
  std::string output = "runs";
  int site = 0;  ///< observable site (1-based); 0 selects L/2
  OracleMode oracle = OracleMode::automatic;

  double resolved_dt() const;
  double resolved_lambda() const;
  int observable_site() const;
  AnsatzShape shape() const;
  bool oracle_enabled() const;
};

/// Every recognized configuration key, in snapshot order.
std::span<const char* const> config_keys();

/// Sets one key from its textual value; ConfigError on unknown keys or bad values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Lines "key = value"; '#' starts a comment; blank lines ignored; keys may
/// appear once.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});
/// "key=value" strings applied after the file.
void apply_overrides(ExperimentConfig& config, std::span<const std::string> overrides);

/// Canonical snapshot with every key resolved; parse_config round-trips it.
std::string render_config(const ExperimentConfig& config);

/// ConfigError for inconsistent settings, ResourceError for refused sizes.
void validate(const ExperimentConfig& config);

TiltedIsingModel post_quench_model(const ExperimentConfig& config);
PtvmcOptions ptvmc_options(const ExperimentConfig& config);
TvmcOptions tvmc_options(const ExperimentConfig& config);
/// The fit enumerates configurations exactly for L <= 14, whatever the sampler.
FitOptions fit_options(const ExperimentConfig& config, int replicate);
/// Base of the replicate's sampling seed stream.
std::uint64_t replicate_seed(const ExperimentConfig& config, int replicate);

std::filesystem::path run_directory(const ExperimentConfig& config, int replicate);
std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int step);

/// State at t = 0 from the pre-quench fit.
std::unique_ptr<Ansatz> prepare_state(const ExperimentConfig& config, int replicate);

struct RunResult {
  std::filesystem::path directory;
  EvolutionRecord record;
};

/// Run directory with snapshot, manifest, the fitted state as checkpoint 0 and
/// an empty diagnostics table; earlier contents are discarded.
std::filesystem::path prepare_replicate(const ExperimentConfig& config, int replicate);

/// One replicate: snapshot, manifest, fit, evolution with a checkpoint per
/// recorded step, then the merit tables.
RunResult run_replicate(const ExperimentConfig& config, int replicate);

/// Continues a replicate from its latest checkpoint up to config.t_final
/// (the snapshot in the run directory, plus overrides).
RunResult resume_replicate(const std::filesystem::path& run_dir, std::span<const std::string> overrides = {});

struct MeritTables {
  CsvTable observables;        ///< fig2_observables.csv
  CsvTable infidelity;         ///< fig2_infidelity.csv
  CsvTable amplitude_phase;    ///< fig3_amplitude_phase.csv, oracle runs only
  bool has_amplitude_phase = false;
};

/// Rebuilds every table of a run directory from its checkpoints and blocks.csv.
MeritTables compute_merits(const std::filesystem::path& run_dir);
void write_merits(const std::filesystem::path& run_dir, const MeritTables& tables);

struct ReplicateSummary {
  double trimmed_mean = 0.0;  ///< mean without one maximum and one minimum
  double p10 = 0.0;
  double p90 = 0.0;
};

/// Percentile by linear interpolation between order statistics at
/// position p (n - 1) of the sorted values.
double percentile(std::span<const double> values, double p);

/// Refused (ConfigError) for fewer than 3 values; NaN anywhere gives NaN.
ReplicateSummary replicate_statistics(std::span<const double> values);

/// summary_<table>.csv in the output directory over its run_* directories.
std::vector<std::filesystem::path> summarize_runs(const std::filesystem::path& output_dir);

}  // namespace nqs
