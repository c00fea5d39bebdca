// Command-line front end: prepare, evolve, merits, stats, resume.

#include "nqs/errors.hpp"
#include "nqs/harness.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nqs;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kResource = 3, kNumeric = 4 };

/// --<key> VALUE for every configuration key, collected in key order.
struct KeyFlags {
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    for (const char* key : config_keys()) {
      app->add_option(std::string("--") + key, values[key], "configuration key '" + std::string(key) + "'");
    }
  }

  std::vector<std::string> overrides(CLI::App* app) const {
    std::vector<std::string> out;
    for (const char* key : config_keys()) {
      if (app->count(std::string("--") + key) > 0) out.push_back(std::string(key) + "=" + values.at(key));
    }
    return out;
  }
};

ExperimentConfig assemble(const std::string& config_file, const std::vector<std::string>& overrides) {
  ExperimentConfig config = config_file.empty() ? ExperimentConfig{} : load_config(config_file);
  apply_overrides(config, overrides);
  validate(config);
  return config;
}

std::vector<int> selected_replicates(const ExperimentConfig& config, std::optional<int> replicate) {
  if (replicate) {
    if (*replicate < 0 || *replicate >= config.replicates) {
      throw ConfigError("--replicate must lie in [0, " + std::to_string(config.replicates - 1) + "]");
    }
    return {*replicate};
  }
  std::vector<int> all(static_cast<std::size_t>(config.replicates));
  for (int r = 0; r < config.replicates; ++r) all[static_cast<std::size_t>(r)] = r;
  return all;
}

std::vector<fs::path> run_directories(const fs::path& path) {
  if (fs::exists(path / "config.txt")) return {path};
  std::vector<fs::path> out;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_directory() && fs::exists(entry.path() / "config.txt")) out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ConfigError("no run directories under " + path.string());
  return out;
}

void report(const RunResult& r) {
  const auto& steps = r.record.steps;
  std::cout << r.directory.string() << ": " << steps.size() << " recorded steps";
  if (!steps.empty()) std::cout << ", t = " << steps.back().t;
  const int unconverged = r.record.unconverged_blocks();
  if (unconverged > 0) std::cout << ", " << unconverged << " blocks above epsilon";
  std::cout << '\n';
}

void set_threads() {
  if (const char* env = std::getenv("NQS_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n < 1) throw ConfigError("NQS_NUM_THREADS must be a positive integer");
    omp_set_num_threads(n);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time neural quantum state dynamics of the tilted Ising chain"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NQS_VERSION);

  std::string config_file;
  std::optional<int> replicate;
  KeyFlags prepare_flags, evolve_flags;

  CLI::App* prepare = app.add_subcommand("prepare", "fit the initial state and write checkpoint 0 of each replicate");
  prepare->add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
  prepare->add_option("--replicate", replicate, "only this replicate index");
  prepare_flags.attach(prepare);

  CLI::App* evolve = app.add_subcommand("evolve", "prepare, evolve to t_final and write the merit tables");
  evolve->add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
  evolve->add_option("--replicate", replicate, "only this replicate index");
  evolve_flags.attach(evolve);

  std::string run_path;
  CLI::App* merits = app.add_subcommand("merits", "rebuild the merit tables from checkpoints");
  merits->add_option("path", run_path, "run directory, or an output directory of runs")->required();

  std::string output_dir;
  CLI::App* stats = app.add_subcommand("stats", "replicate statistics over the run_* directories");
  stats->add_option("output", output_dir, "output directory holding run_* directories")->required();

  std::vector<std::string> resume_sets;
  CLI::App* resume = app.add_subcommand("resume", "continue runs from their latest checkpoint");
  resume->add_option("path", run_path, "run directory, or an output directory of runs")->required();
  resume->add_option("--set", resume_sets, "key=value override, e.g. --set t_final=4");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    set_threads();
    if (prepare->parsed()) {
      const ExperimentConfig config = assemble(config_file, prepare_flags.overrides(prepare));
      for (int r : selected_replicates(config, replicate)) {
        std::cout << prepare_replicate(config, r).string() << ": initial state ready\n";
      }
    } else if (evolve->parsed()) {
      const ExperimentConfig config = assemble(config_file, evolve_flags.overrides(evolve));
      for (int r : selected_replicates(config, replicate)) report(run_replicate(config, r));
    } else if (merits->parsed()) {
      for (const fs::path& dir : run_directories(run_path)) {
        write_merits(dir, compute_merits(dir));
        std::cout << dir.string() << ": merit tables written\n";
      }
    } else if (stats->parsed()) {
      for (const fs::path& p : summarize_runs(output_dir)) std::cout << p.string() << '\n';
    } else if (resume->parsed()) {
      for (const fs::path& dir : run_directories(run_path)) report(resume_replicate(dir, resume_sets));
    }
  } catch (const ResourceError& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return kResource;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const EstimationError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
