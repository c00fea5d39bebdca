#include "nqs/harness.hpp"

#include "nqs/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#ifndef NQS_VERSION
#define NQS_VERSION "unknown"
#endif

namespace nqs {

namespace fs = std::filesystem;

namespace {

constexpr const char* kKeys[] = {
    "L",           "J",           "hx",          "hz",         "initial_hx",    "ansatz",        "layers",
    "alpha",       "method",      "sampler",     "n_samples",  "n_chains",      "burn_in",       "thinning",
    "seed",        "epsilon",     "max_steps",   "learning_rate", "lr_decay",   "lr_every",      "block_span",
    "solver",      "kfac_blocks", "dt",          "lambda",     "record_interval", "init_noise",  "hidden_weight_scale",
    "hidden_bias_scale", "fit_target", "fit_max_steps", "ranks", "t_final",      "replicates",    "output",
    "site",        "oracle",
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x)) {
    throw ConfigError("'" + key + "' expects a finite number, got '" + value + "'");
  }
  return x;
}

template <typename Int>
Int to_integer(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  Int x{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  }
  return x;
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_integer<int>(key, item));
  if (out.empty()) throw ConfigError("'" + key + "' expects a comma-separated list of integers");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

bool is_multiple(double value, double unit) {
  const double k = std::round(value / unit);
  return std::abs(k * unit - value) <= 1e-9 * std::max(1.0, std::abs(value));
}

std::uint64_t mix(std::uint64_t base, std::uint64_t tag, std::uint64_t index) {
  SeedStream s{base ^ tag, index};
  return s.next();
}

constexpr std::uint64_t kReplicateTag = 0x7265706cULL;
constexpr std::uint64_t kFitTag = 0x66697473ULL;
constexpr std::uint64_t kObservableTag = 0x6f627376ULL;

int step_from_filename(const fs::path& p) {
  const std::string name = p.filename().string();
  if (name.rfind("step_", 0) != 0 || p.extension() != ".bin") return -1;
  const std::string digits = name.substr(5, name.size() - 9);
  int n = -1;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  return (ec == std::errc{} && ptr == digits.data() + digits.size()) ? n : -1;
}

std::vector<std::pair<int, fs::path>> list_checkpoints(const fs::path& run_dir) {
  std::vector<std::pair<int, fs::path>> out;
  const fs::path dir = run_dir / "checkpoints";
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const int n = step_from_filename(entry.path());
    if (n >= 0) out.emplace_back(n, entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<std::string> kBlockHeader{"step", "t", "block", "start", "span", "initial_infidelity", "infidelity",
                                            "steps", "converged", "residual", "fallback"};
const std::vector<std::string> kTvmcHeader{"step", "t", "residual", "fallback", "rank"};

void append_block_rows(CsvTable& table, const StepReport& report) {
  for (std::size_t i = 0; i < report.blocks.size(); ++i) {
    const BlockReport& b = report.blocks[i];
    table.add_row({std::to_string(report.index), format_double(report.t), std::to_string(i + 1), std::to_string(b.start),
                   std::to_string(b.span), format_double(b.initial_infidelity), format_double(b.infidelity),
                   std::to_string(b.steps), b.converged ? "1" : "0", format_double(b.solver.residual_norm),
                   b.solver.fallback ? "1" : "0"});
  }
}

/// Keeps rows whose step column is at most `last`.
CsvTable rows_up_to(const CsvTable& table, int last) {
  CsvTable out;
  out.header = table.header;
  const std::size_t col = table.column("step");
  for (const auto& row : table.rows) {
    if (to_integer<int>("step", row[col]) <= last) out.rows.push_back(row);
  }
  return out;
}

Metadata checkpoint_meta(int step, double t, const SeedStream& seeds) {
  return Metadata{{"step", std::to_string(step)},
                  {"t", format_double(t)},
                  {"seed_base", std::to_string(seeds.base)},
                  {"seed_counter", std::to_string(seeds.counter)}};
}

/// Evolution from `first_step` with checkpoints and diagnostics tables.
EvolutionRecord continue_run(const ExperimentConfig& config, const fs::path& dir, std::unique_ptr<Ansatz>& psi,
                             SeedStream& seeds, int first_step, CsvTable diagnostics) {
  const TiltedIsingModel model = post_quench_model(config);
  EvolutionRecord record;
  if (config.method == Method::ptvmc) {
    const auto callback = [&](const StepReport& report, const Ansatz& state) {
      save_ansatz(checkpoint_path(dir, report.index), state, checkpoint_meta(report.index, report.t, seeds));
      append_block_rows(diagnostics, report);
      atomic_write(dir / "blocks.csv", diagnostics.render());
    };
    record = evolve_ptvmc(psi, model, ptvmc_options(config), config.t_final, seeds, callback, first_step);
  } else {
    const auto callback = [&](const StepReport& report, const Ansatz& state) {
      save_ansatz(checkpoint_path(dir, report.index), state, checkpoint_meta(report.index, report.t, seeds));
      diagnostics.add_row({std::to_string(report.index), format_double(report.t),
                           format_double(report.tvmc_solver.residual_norm), report.tvmc_solver.fallback ? "1" : "0",
                           std::to_string(report.tvmc_solver.rank)});
      atomic_write(dir / "tvmc_solver.csv", diagnostics.render());
    };
    record = evolve_tvmc(*psi, model, tvmc_options(config), config.t_final, seeds, callback, first_step);
  }
  return record;
}

std::string manifest_text(const ExperimentConfig& config, int replicate) {
  std::ostringstream m;
  m << "code_version = " << NQS_VERSION << '\n'
    << "replicate = " << replicate << '\n'
    << "seed = " << config.seed << '\n'
    << "sampling_seed_base = " << replicate_seed(config, replicate) << '\n'
    << "fit_seed = " << fit_options(config, replicate).seed << '\n'
    << "oracle = " << (config.oracle_enabled() ? "enabled" : "disabled") << '\n'
    << "num_parameters = " << parameter_count(config.shape()) << '\n';
  return m.str();
}

}  // namespace

// --- configuration ------------------------------------------------------------

double ExperimentConfig::resolved_dt() const { return dt.value_or(method == Method::ptvmc ? 0.1 : 1e-3); }

double ExperimentConfig::resolved_lambda() const { return lambda.value_or(method == Method::ptvmc ? 1e-6 : 0.0); }

int ExperimentConfig::observable_site() const { return site > 0 ? site : std::max(1, num_sites / 2); }

AnsatzShape ExperimentConfig::shape() const {
  if (ansatz == "rbm") return rbm_shape(num_sites, alpha);
  if (layers.empty()) return default_fnn_shape(num_sites);
  return FnnShape{layers};
}

bool ExperimentConfig::oracle_enabled() const {
  switch (oracle) {
    case OracleMode::on:
      return true;
    case OracleMode::off:
      return false;
    case OracleMode::automatic:
      break;
  }
  return num_sites <= kMaxDenseSites;
}

std::span<const char* const> config_keys() { return kKeys; }

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "L") {
    c.num_sites = to_integer<int>(key, value);
  } else if (key == "J") {
    c.coupling = to_double(key, value);
  } else if (key == "hx") {
    c.field_x = to_double(key, value);
  } else if (key == "hz") {
    c.field_z = to_double(key, value);
  } else if (key == "initial_hx") {
    c.initial_field_x = to_double(key, value);
  } else if (key == "ansatz") {
    if (value != "fnn" && value != "rbm") throw ConfigError("ansatz must be fnn or rbm, got '" + value + "'");
    c.ansatz = value;
  } else if (key == "layers") {
    c.layers = value == "default" ? std::vector<int>{} : to_int_list(key, value);
  } else if (key == "alpha") {
    c.alpha = to_integer<int>(key, value);
  } else if (key == "method") {
    if (value == "ptvmc") {
      c.method = Method::ptvmc;
    } else if (value == "tvmc") {
      c.method = Method::tvmc;
    } else {
      throw ConfigError("method must be ptvmc or tvmc, got '" + value + "'");
    }
  } else if (key == "sampler") {
    if (value == "metropolis") {
      c.sampler.mode = SamplingMode::monte_carlo;
    } else if (value == "full") {
      c.sampler.mode = SamplingMode::full_summation;
    } else {
      throw ConfigError("sampler must be metropolis or full, got '" + value + "'");
    }
  } else if (key == "n_samples") {
    c.sampler.n_samples = to_integer<Eigen::Index>(key, value);
  } else if (key == "n_chains") {
    c.sampler.n_chains = to_integer<int>(key, value);
  } else if (key == "burn_in") {
    c.sampler.burn_in = to_integer<long>(key, value);
  } else if (key == "thinning") {
    c.sampler.thinning = to_integer<long>(key, value);
  } else if (key == "seed") {
    c.seed = to_integer<std::uint64_t>(key, value);
  } else if (key == "epsilon") {
    c.epsilon = to_double(key, value);
  } else if (key == "max_steps") {
    c.max_steps = to_integer<int>(key, value);
  } else if (key == "learning_rate") {
    c.learning_rate.initial = to_double(key, value);
  } else if (key == "lr_decay") {
    c.learning_rate.decay = to_double(key, value);
  } else if (key == "lr_every") {
    c.learning_rate.every = to_integer<int>(key, value);
  } else if (key == "block_span") {
    c.block_span = to_integer<int>(key, value);
  } else if (key == "solver") {
    c.solver = parse_solver_method(value);
  } else if (key == "kfac_blocks") {
    c.kfac_blocks = value == "default" ? std::vector<int>{} : to_int_list(key, value);
  } else if (key == "dt") {
    c.dt = to_double(key, value);
  } else if (key == "lambda") {
    c.lambda = to_double(key, value);
  } else if (key == "record_interval") {
    c.record_interval = to_double(key, value);
  } else if (key == "init_noise") {
    c.init_noise = to_double(key, value);
  } else if (key == "hidden_weight_scale") {
    c.hidden.weight = to_double(key, value);
  } else if (key == "hidden_bias_scale") {
    c.hidden.bias = to_double(key, value);
  } else if (key == "fit_target") {
    c.fit_target = to_double(key, value);
  } else if (key == "fit_max_steps") {
    c.fit_max_steps = to_integer<int>(key, value);
  } else if (key == "ranks") {
    c.ranks = to_int_list(key, value);
  } else if (key == "t_final") {
    c.t_final = to_double(key, value);
  } else if (key == "replicates") {
    c.replicates = to_integer<int>(key, value);
  } else if (key == "output") {
    if (value.empty()) throw ConfigError("output directory must not be empty");
    c.output = value;
  } else if (key == "site") {
    c.site = to_integer<int>(key, value);
  } else if (key == "oracle") {
    if (value == "auto") {
      c.oracle = OracleMode::automatic;
    } else if (value == "on") {
      c.oracle = OracleMode::on;
    } else if (value == "off") {
      c.oracle = OracleMode::off;
    } else {
      throw ConfigError("oracle must be auto, on or off, got '" + value + "'");
    }
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(number) + ": '" + key + "' set twice");
    apply_setting(config, key, line.substr(eq + 1));
  }
  return config;
}

void apply_overrides(ExperimentConfig& config, std::span<const std::string> overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    apply_setting(config, o.substr(0, eq), o.substr(eq + 1));
  }
}

ExperimentConfig load_config(const fs::path& path, std::span<const std::string> overrides) {
  ExperimentConfig config = parse_config(read_text(path));
  apply_overrides(config, overrides);
  return config;
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream o;
  const auto line = [&o](const char* key, const std::string& value) { o << key << " = " << value << '\n'; };
  line("L", std::to_string(c.num_sites));
  line("J", format_double(c.coupling));
  line("hx", format_double(c.field_x));
  line("hz", format_double(c.field_z));
  line("initial_hx", format_double(c.initial_field_x));
  line("ansatz", c.ansatz);
  if (c.ansatz == "fnn") {
    line("layers", join(std::get<FnnShape>(c.shape()).layer_sizes));
  } else {
    line("layers", c.layers.empty() ? "default" : join(c.layers));
  }
  line("alpha", std::to_string(c.alpha));
  line("method", c.method == Method::ptvmc ? "ptvmc" : "tvmc");
  line("sampler", c.sampler.mode == SamplingMode::full_summation ? "full" : "metropolis");
  line("n_samples", std::to_string(c.sampler.n_samples));
  line("n_chains", std::to_string(c.sampler.n_chains));
  line("burn_in", std::to_string(c.sampler.burn_in));
  line("thinning", std::to_string(c.sampler.thinning));
  line("seed", std::to_string(c.seed));
  line("epsilon", format_double(c.epsilon));
  line("max_steps", std::to_string(c.max_steps));
  line("learning_rate", format_double(c.learning_rate.initial));
  line("lr_decay", format_double(c.learning_rate.decay));
  line("lr_every", std::to_string(c.learning_rate.every));
  line("block_span", std::to_string(c.block_span));
  line("solver", to_string(c.solver));
  line("kfac_blocks", c.kfac_blocks.empty() ? "default" : join(c.kfac_blocks));
  line("dt", format_double(c.resolved_dt()));
  line("lambda", format_double(c.resolved_lambda()));
  line("record_interval", format_double(c.record_interval));
  line("init_noise", format_double(c.init_noise));
  line("hidden_weight_scale", format_double(c.hidden.weight));
  line("hidden_bias_scale", format_double(c.hidden.bias));
  line("fit_target", format_double(c.fit_target));
  line("fit_max_steps", std::to_string(c.fit_max_steps));
  line("ranks", join(c.ranks));
  line("t_final", format_double(c.t_final));
  line("replicates", std::to_string(c.replicates));
  line("output", c.output);
  line("site", std::to_string(c.observable_site()));
  line("oracle", c.oracle == OracleMode::automatic ? "auto" : (c.oracle == OracleMode::on ? "on" : "off"));
  return o.str();
}

void validate(const ExperimentConfig& c) {
  const int L = c.num_sites;
  if (L < 2 || L > kMaxSites) throw ConfigError("L must lie in [2, " + std::to_string(kMaxSites) + "]");
  if (!(c.initial_field_x > 0.0)) throw ConfigError("initial_hx must be positive (paramagnetic initial state)");
  if (c.ansatz == "rbm" && c.alpha < 1) throw ConfigError("alpha must be at least 1");
  if (c.ansatz == "rbm" && !c.layers.empty()) throw ConfigError("layers applies to the fnn ansatz only");
  const AnsatzShape shape = c.shape();
  validate_shape(shape);
  if (shape_sites(shape) != L) throw DimensionError("the first layer must have L nodes");

  if (c.sampler.mode == SamplingMode::monte_carlo) {
    if (c.sampler.n_samples < 1 || c.sampler.n_chains < 1) throw ConfigError("need at least one sample and one chain");
  } else if (L > kMaxEnumeratedSites) {
    throw ResourceError("full summation refused: L = " + std::to_string(L) + " exceeds " +
                        std::to_string(kMaxEnumeratedSites) + " sites");
  }
  if (c.oracle == OracleMode::on && L > kMaxDenseSites) {
    throw ResourceError("oracle merits refused: L = " + std::to_string(L) + " exceeds " +
                        std::to_string(kMaxDenseSites) + " sites; use oracle = off or auto");
  }

  const double dt = c.resolved_dt();
  const double lambda = c.resolved_lambda();
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(c.t_final >= 0.0)) throw ConfigError("t_final must be non-negative");
  if (c.replicates < 1) throw ConfigError("replicates must be at least 1");
  if (c.site < 0 || c.site > L) throw ConfigError("site must lie in [1, L] (0 selects L/2)");
  for (int n : c.ranks) {
    if (n < 1) throw ConfigError("ranks are 1-based");
  }
  if (!(c.init_noise >= 0.0) || !(c.hidden.weight >= 0.0) || !(c.hidden.bias >= 0.0)) {
    throw ConfigError("initialization scales must be non-negative");
  }
  if (!(c.fit_target > 0.0) || c.fit_max_steps < 1) throw ConfigError("fit_target > 0 and fit_max_steps >= 1 required");
  if (c.ansatz == "rbm" && !c.kfac_blocks.empty()) throw ConfigError("kfac_blocks applies to the fnn ansatz only");

  if (c.method == Method::ptvmc) {
    validate(ptvmc_options(c));
    if (c.block_span < 2 || c.block_span > L) throw ConfigError("block_span must lie in [2, L]");
    if (c.solver == SolverMethod::minsr && !(lambda > 0.0)) throw ConfigError("minsr needs lambda > 0");
    if (!is_multiple(c.t_final, dt)) throw ConfigError("t_final must be a multiple of dt");
  } else {
    if (!is_multiple(c.record_interval, dt) || c.record_interval < dt) {
      throw ConfigError("record_interval must be a positive multiple of dt");
    }
    if (!is_multiple(c.t_final, c.record_interval)) throw ConfigError("t_final must be a multiple of record_interval");
  }
  const SolverConfig solver = ptvmc_options(c).solver;
  if (solver.method == SolverMethod::kfac) validate_partition(solver.kfac_partition, parameter_count(shape));
}

TiltedIsingModel post_quench_model(const ExperimentConfig& c) {
  return build_model(c.num_sites, c.coupling, c.field_x, c.field_z);
}

PtvmcOptions ptvmc_options(const ExperimentConfig& c) {
  PtvmcOptions o;
  o.epsilon = c.epsilon;
  o.max_steps = c.max_steps;
  o.learning_rate = c.learning_rate;
  o.sampler = c.sampler;
  o.block_span = c.block_span;
  o.dt = c.resolved_dt();
  o.solver.method = c.solver;
  o.solver.lambda = c.resolved_lambda();
  if (c.solver == SolverMethod::kfac) {
    const AnsatzShape shape = c.shape();
    if (const auto* fnn = std::get_if<FnnShape>(&shape)) {
      std::vector<int> blocks = c.kfac_blocks;
      if (blocks.empty()) blocks.assign(fnn->layer_sizes.size() - 1, 1);
      o.solver.kfac_partition = kfac_partition_from_layers(*fnn, blocks);
    } else {
      o.solver.kfac_partition = rbm_partition(std::get<RbmShape>(shape));
    }
  }
  return o;
}

TvmcOptions tvmc_options(const ExperimentConfig& c) {
  TvmcOptions o;
  o.dt = c.resolved_dt();
  o.lambda = c.resolved_lambda();
  o.sampler = c.sampler;
  o.record_every = std::max(1, static_cast<int>(std::llround(c.record_interval / o.dt)));
  return o;
}

FitOptions fit_options(const ExperimentConfig& c, int replicate) {
  FitOptions f;
  f.noise_scale = c.init_noise;
  f.hidden = c.hidden;
  f.seed = mix(c.seed, kFitTag, static_cast<std::uint64_t>(replicate));
  f.target_infidelity = c.fit_target;
  ExperimentConfig fit_config = c;
  fit_config.method = Method::ptvmc;
  if (c.method == Method::tvmc) {
    fit_config.lambda.reset();
    fit_config.dt.reset();
  }
  f.optimizer = ptvmc_options(fit_config);
  f.optimizer.max_steps = c.fit_max_steps;
  // sampled overlaps cannot resolve infidelities below ~1 / n_samples
  if (c.num_sites <= kMaxDenseSites) f.optimizer.sampler.mode = SamplingMode::full_summation;
  return f;
}

std::uint64_t replicate_seed(const ExperimentConfig& c, int replicate) {
  return mix(c.seed, kReplicateTag, static_cast<std::uint64_t>(replicate));
}

fs::path run_directory(const ExperimentConfig& c, int replicate) {
  char name[32];
  std::snprintf(name, sizeof name, "run_%02d", replicate);
  return fs::path(c.output) / name;
}

fs::path checkpoint_path(const fs::path& run_dir, int step) {
  char name[32];
  std::snprintf(name, sizeof name, "step_%06d.bin", step);
  return run_dir / "checkpoints" / name;
}

std::unique_ptr<Ansatz> prepare_state(const ExperimentConfig& config, int replicate) {
  return prepare_initial_state(config.shape(), fit_options(config, replicate));
}

// --- runs -----------------------------------------------------------------------

fs::path prepare_replicate(const ExperimentConfig& config, int replicate) {
  validate(config);
  if (replicate < 0) throw ConfigError("replicate index must be non-negative");
  const fs::path dir = run_directory(config, replicate);
  fs::create_directories(dir / "checkpoints");
  for (const auto& [step, path] : list_checkpoints(dir)) fs::remove(path);
  for (const char* stale : {"blocks.csv", "tvmc_solver.csv", "fig2_observables.csv", "fig2_infidelity.csv",
                            "fig3_amplitude_phase.csv"}) {
    fs::remove(dir / stale);
  }
  atomic_write(dir / "config.txt", render_config(config));
  atomic_write(dir / "manifest.txt", manifest_text(config, replicate));

  const std::unique_ptr<Ansatz> psi = prepare_state(config, replicate);
  const SeedStream seeds{replicate_seed(config, replicate), 0};
  save_ansatz(checkpoint_path(dir, 0), *psi, checkpoint_meta(0, 0.0, seeds));
  CsvTable diagnostics;
  diagnostics.header = config.method == Method::ptvmc ? kBlockHeader : kTvmcHeader;
  atomic_write(dir / (config.method == Method::ptvmc ? "blocks.csv" : "tvmc_solver.csv"), diagnostics.render());
  return dir;
}

RunResult run_replicate(const ExperimentConfig& config, int replicate) {
  return resume_replicate(prepare_replicate(config, replicate));
}

RunResult resume_replicate(const fs::path& run_dir, std::span<const std::string> overrides) {
  ExperimentConfig config = load_config(run_dir / "config.txt", overrides);
  validate(config);
  const auto checkpoints = list_checkpoints(run_dir);
  if (checkpoints.empty()) throw ConfigError("no checkpoints in " + run_dir.string() + "; run prepare or evolve first");
  const auto& [step, path] = checkpoints.back();
  LoadedAnsatz loaded = load_ansatz(path);
  if (loaded.state->shape() != config.shape()) throw DimensionError("checkpoint shape differs from the configuration");
  SeedStream seeds{to_integer<std::uint64_t>("seed_base", loaded.meta.at("seed_base")),
                   to_integer<std::uint64_t>("seed_counter", loaded.meta.at("seed_counter"))};

  const fs::path diag_path = run_dir / (config.method == Method::ptvmc ? "blocks.csv" : "tvmc_solver.csv");
  CsvTable diagnostics;
  if (fs::exists(diag_path)) {
    diagnostics = rows_up_to(read_csv(diag_path), step);
  } else {
    diagnostics.header = config.method == Method::ptvmc ? kBlockHeader : kTvmcHeader;
  }
  atomic_write(run_dir / "config.txt", render_config(config));

  RunResult result;
  result.directory = run_dir;
  result.record = continue_run(config, run_dir, loaded.state, seeds, step, std::move(diagnostics));
  write_merits(run_dir, compute_merits(run_dir));
  return result;
}

// --- merits ---------------------------------------------------------------------

MeritTables compute_merits(const fs::path& run_dir) {
  const ExperimentConfig config = load_config(run_dir / "config.txt");
  validate(config);
  const auto checkpoints = list_checkpoints(run_dir);
  if (checkpoints.empty()) throw ConfigError("no checkpoints in " + run_dir.string());
  const TiltedIsingModel model = post_quench_model(config);
  const int L = config.num_sites;
  const int site = config.observable_site();
  const bool oracle = config.oracle_enabled();
  const double grid = config.method == Method::ptvmc ? config.resolved_dt() : config.record_interval;

  std::optional<ExactPropagator> propagator;
  DenseState initial;
  std::vector<Code> ranking;
  std::vector<int> ranks;
  if (oracle) {
    propagator.emplace(model);
    initial = uniform_state(L);
    const std::size_t dim = std::size_t{1} << L;
    for (int n : config.ranks) {
      if (static_cast<std::size_t>(n) <= dim) ranks.push_back(n);
    }
    const int deepest = ranks.empty() ? 1 : *std::max_element(ranks.begin(), ranks.end());
    ranking = ranked_configurations(propagator->evolve(initial, config.t_final), static_cast<std::size_t>(deepest));
  }

  MeritTables tables;
  tables.observables.header = {"step", "t", "sigma_x_mid", "sigma_z_mid", "energy",
                               "exact_sigma_x_mid", "exact_sigma_z_mid", "exact_energy"};
  tables.infidelity.header = {"step", "t", "infidelity_exact", "integrated_infidelity_exact", "block_infidelity_sum",
                              "accumulated_error"};
  tables.amplitude_phase.header = {"step", "t", "rank", "config_top", "config_rank", "amplitude_ratio",
                                   "phase_distance", "exact_amplitude_ratio", "exact_phase_distance", "overflow"};
  tables.has_amplitude_phase = oracle;

  // per-step sums of block infidelities (p-tVMC only)
  std::map<int, double> block_sums;
  const fs::path blocks_path = run_dir / "blocks.csv";
  if (config.method == Method::ptvmc && fs::exists(blocks_path)) {
    const CsvTable blocks = read_csv(blocks_path);
    const std::size_t sc = blocks.column("step");
    const std::size_t ic = blocks.column("infidelity");
    for (const auto& row : blocks.rows) block_sums[to_integer<int>("step", row[sc])] += to_double("infidelity", row[ic]);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> exact_series;
  std::vector<double> block_series;
  std::vector<std::pair<int, double>> grid_points;
  for (const auto& [step, path] : checkpoints) {
    const LoadedAnsatz loaded = load_ansatz(path);
    const Ansatz& psi = *loaded.state;
    const double t = to_double("t", loaded.meta.at("t"));
    grid_points.emplace_back(step, t);

    const SampleSet samples =
        L <= kMaxEnumeratedSites
            ? full_summation(psi)
            : draw_samples(psi, config.sampler,
                           mix(to_integer<std::uint64_t>("seed_base", loaded.meta.at("seed_base")), kObservableTag,
                               static_cast<std::uint64_t>(step)));
    const double sx = expectation(Observable::sigma_x(site), samples, psi, model).real();
    const double sz = expectation(Observable::sigma_z(site), samples, psi, model).real();
    const double energy = expectation(Observable::energy(), samples, psi, model).real();

    double ex_sx = nan, ex_sz = nan, ex_energy = nan, ie = nan;
    std::optional<DenseState> exact;
    if (oracle) {
      exact = propagator->evolve(initial, t);
      ex_sx = dense_expectation(*exact, model, Observable::sigma_x(site));
      ex_sz = dense_expectation(*exact, model, Observable::sigma_z(site));
      ex_energy = dense_expectation(*exact, model, Observable::energy());
      ie = std::max(exact_infidelity(psi, *exact), 0.0);
      for (int n : ranks) {
        const Code top = ranking[0];
        const Code other = ranking[static_cast<std::size_t>(n - 1)];
        const AmplitudePhase nn = amplitude_ratio_and_phase_distance(psi, top, other);
        const AmplitudePhase ed = amplitude_ratio_and_phase_distance(*exact, top, other);
        tables.amplitude_phase.add_row({std::to_string(step), format_double(t), std::to_string(n), std::to_string(top),
                                        std::to_string(other), format_double(nn.ratio),
                                        format_double(nn.phase_distance), format_double(ed.ratio),
                                        format_double(ed.phase_distance), nn.overflow ? "1" : "0"});
      }
    }
    tables.observables.add_row({std::to_string(step), format_double(t), format_double(sx), format_double(sz),
                                format_double(energy), format_double(ex_sx), format_double(ex_sz),
                                format_double(ex_energy)});
    exact_series.push_back(ie);
    if (config.method == Method::ptvmc) {
      const auto it = block_sums.find(step);
      block_series.push_back(step == 0 ? 0.0 : (it == block_sums.end() ? nan : it->second));
    } else {
      block_series.push_back(nan);
    }
  }

  const std::vector<double> integrated = integrate_series(exact_series, grid);
  const std::vector<double> accumulated = integrate_series(block_series, grid);
  for (std::size_t i = 0; i < grid_points.size(); ++i) {
    tables.infidelity.add_row({std::to_string(grid_points[i].first), format_double(grid_points[i].second),
                               format_double(exact_series[i]), format_double(integrated[i]),
                               format_double(block_series[i]), format_double(accumulated[i])});
  }
  return tables;
}

void write_merits(const fs::path& run_dir, const MeritTables& tables) {
  atomic_write(run_dir / "fig2_observables.csv", tables.observables.render());
  atomic_write(run_dir / "fig2_infidelity.csv", tables.infidelity.render());
  if (tables.has_amplitude_phase) atomic_write(run_dir / "fig3_amplitude_phase.csv", tables.amplitude_phase.render());
}

// --- replicate statistics -----------------------------------------------------------

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw ConfigError("percentile of no values");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("percentile must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ReplicateSummary replicate_statistics(std::span<const double> values) {
  if (values.size() < 3) {
    throw ConfigError("replicate statistics refused: " + std::to_string(values.size()) + " runs, at least 3 needed");
  }
  ReplicateSummary s;
  if (std::any_of(values.begin(), values.end(), [](double v) { return std::isnan(v); })) {
    s.trimmed_mean = s.p10 = s.p90 = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < sorted.size(); ++i) sum += sorted[i];
  s.trimmed_mean = sum / static_cast<double>(sorted.size() - 2);
  s.p10 = percentile(sorted, 0.1);
  s.p90 = percentile(sorted, 0.9);
  return s;
}

std::vector<fs::path> summarize_runs(const fs::path& output_dir) {
  std::vector<fs::path> runs;
  if (fs::is_directory(output_dir)) {
    for (const auto& entry : fs::directory_iterator(output_dir)) {
      if (entry.is_directory() && entry.path().filename().string().rfind("run_", 0) == 0) runs.push_back(entry.path());
    }
  }
  std::sort(runs.begin(), runs.end());
  if (runs.size() < 3) {
    throw ConfigError("replicate statistics refused: " + std::to_string(runs.size()) + " runs in " +
                      output_dir.string() + ", at least 3 needed");
  }

  struct TableSpec {
    const char* name;
    std::vector<std::string> keys;
  };
  const TableSpec specs[] = {{"fig2_observables", {"step", "t"}},
                             {"fig2_infidelity", {"step", "t"}},
                             {"fig3_amplitude_phase", {"step", "t", "rank"}}};
  const std::set<std::string> skip{"config_top", "config_rank", "overflow"};

  std::vector<fs::path> written;
  for (const TableSpec& spec : specs) {
    const std::string file = std::string(spec.name) + ".csv";
    if (!std::all_of(runs.begin(), runs.end(), [&](const fs::path& r) { return fs::exists(r / file); })) continue;
    std::vector<CsvTable> tables;
    for (const auto& r : runs) tables.push_back(read_csv(r / file));
    const CsvTable& first = tables.front();
    for (const auto& t : tables) {
      if (t.header != first.header || t.rows.size() != first.rows.size()) {
        throw ConfigError(file + " differs in shape between runs; finish or resume every run first");
      }
    }
    CsvTable summary;
    summary.header = spec.keys;
    for (const char* extra : {"metric", "trimmed_mean", "p10", "p90", "runs"}) summary.header.emplace_back(extra);
    std::vector<std::size_t> key_cols;
    for (const auto& k : spec.keys) key_cols.push_back(first.column(k));
    for (std::size_t r = 0; r < first.rows.size(); ++r) {
      for (const auto& t : tables) {
        for (std::size_t k : key_cols) {
          if (k != first.column("t") && t.rows[r][k] != first.rows[r][k]) {
            throw ConfigError(file + ": row keys differ between runs");
          }
        }
      }
      for (std::size_t c = 0; c < first.header.size(); ++c) {
        const std::string& metric = first.header[c];
        if (std::find(spec.keys.begin(), spec.keys.end(), metric) != spec.keys.end() || skip.count(metric)) continue;
        std::vector<double> values;
        for (const auto& t : tables) {
          const std::string& cell = t.rows[r][c];
          values.push_back(cell == "nan" ? std::numeric_limits<double>::quiet_NaN()
                           : cell == "inf" ? std::numeric_limits<double>::infinity()
                                           : to_double(metric, cell));
        }
        const ReplicateSummary s = replicate_statistics(values);
        std::vector<std::string> row;
        for (std::size_t k : key_cols) row.push_back(first.rows[r][k]);
        row.insert(row.end(), {metric, format_double(s.trimmed_mean), format_double(s.p10), format_double(s.p90),
                               std::to_string(runs.size())});
        summary.add_row(std::move(row));
      }
    }
    const fs::path out = output_dir / ("summary_" + file);
    atomic_write(out, summary.render());
    written.push_back(out);
  }
  return written;
}

}  // namespace nqs
