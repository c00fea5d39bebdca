#include "doctest.h"

#include "nqs/errors.hpp"
#include "nqs/harness.hpp"

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <random>
#include <unistd.h>

using namespace nqs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nqs_harness_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config(const fs::path& output) {
  ExperimentConfig c;
  c.num_sites = 4;
  c.ansatz = "rbm";
  c.alpha = 1;
  c.init_noise = 0.0;
  c.block_span = 2;
  c.t_final = 0.3;
  c.epsilon = 1e-3;
  c.max_steps = 30;
  c.sampler.n_samples = 256;
  c.sampler.n_chains = 4;
  c.ranks = {2, 3, 500};
  c.replicates = 3;
  c.output = output.string();
  return c;
}

std::string file_bytes(const fs::path& p) { return read_text(p); }

}  // namespace

TEST_CASE("configuration text round-trips") {
  ExperimentConfig c = parse_config(
      "# comment\n"
      "L = 8\n"
      "ansatz = fnn   # trailing comment\n"
      "solver = kfac\n"
      "kfac_blocks = 2,1,1\n"
      "sampler = full\n"
      "ranks = 2,5\n"
      "oracle = on\n");
  CHECK(c.num_sites == 8);
  CHECK(c.solver == SolverMethod::kfac);
  CHECK(c.kfac_blocks == std::vector<int>{2, 1, 1});
  CHECK(c.sampler.mode == SamplingMode::full_summation);
  CHECK(c.oracle == OracleMode::on);
  CHECK(c.resolved_dt() == 0.1);
  CHECK(c.resolved_lambda() == 1e-6);
  CHECK(c.observable_site() == 4);
  CHECK_NOTHROW(validate(c));

  const std::string text = render_config(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(render_config(back) == text);
  CHECK(std::get<FnnShape>(back.shape()).layer_sizes == std::vector<int>{8, 32, 24, 1});

  // every documented key appears in the snapshot
  for (const char* key : config_keys()) CHECK(text.find(std::string(key) + " = ") != std::string::npos);

  ExperimentConfig t;
  const std::vector<std::string> overrides{"method=tvmc", "seed=9"};
  apply_overrides(t, overrides);
  CHECK(t.method == Method::tvmc);
  CHECK(t.seed == 9u);
  CHECK(t.resolved_dt() == 1e-3);
  CHECK(t.resolved_lambda() == 0.0);
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(parse_config("colour = blue\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("L 8\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("L = 8\nL = 9\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("L = eight\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dt = 1e-2x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("solver = cg\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("method = exact\n"), ConfigError);

  const auto invalid = [](const std::string& text) { validate(parse_config(text)); };
  CHECK_THROWS_AS(invalid("L = 1\n"), ConfigError);
  CHECK_THROWS_AS(invalid("L = 21\nsampler = full\n"), ResourceError);
  CHECK_THROWS_AS(invalid("L = 15\noracle = on\n"), ResourceError);
  CHECK_NOTHROW(invalid("L = 15\n"));
  CHECK_FALSE(parse_config("L = 15\n").oracle_enabled());
  CHECK_THROWS_AS(invalid("L = 6\nlayers = 5,10,1\n"), DimensionError);
  CHECK_THROWS_AS(invalid("L = 6\nblock_span = 7\n"), ConfigError);
  CHECK_THROWS_AS(invalid("L = 6\nsolver = minsr\nlambda = 0\n"), ConfigError);
  CHECK_THROWS_AS(invalid("L = 6\nt_final = 0.25\n"), ConfigError);
  CHECK_THROWS_AS(invalid("L = 6\nmethod = tvmc\nrecord_interval = 0.0015\n"), ConfigError);
  CHECK_THROWS_AS(invalid("L = 6\nmethod = tvmc\nt_final = 0.25\n"), ConfigError);
  CHECK_THROWS_AS(invalid("L = 6\nsolver = kfac\nkfac_blocks = 1,1\n"), ConfigError);
  CHECK_THROWS_AS(invalid("L = 6\nansatz = rbm\nkfac_blocks = 1\n"), ConfigError);
  CHECK_THROWS_AS(invalid("L = 6\nranks = 0\n"), ConfigError);
}

TEST_CASE("replicate statistics") {
  SUBCASE("ten ordered values") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const ReplicateSummary s = replicate_statistics(v);
    CHECK(s.trimmed_mean == doctest::Approx(5.5));
    CHECK(s.p10 == doctest::Approx(1.9));
    CHECK(s.p90 == doctest::Approx(9.1));
  }
  SUBCASE("unsorted fixture with ties") {
    // sorted: 1 1 2 3 3 4 5 5 6 9; trimmed mean 29/8; p10 at 0.9, p90 at 8.1
    const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
    const ReplicateSummary s = replicate_statistics(v);
    CHECK(s.trimmed_mean == doctest::Approx(3.625));
    CHECK(s.p10 == doctest::Approx(1.0));
    CHECK(s.p90 == doctest::Approx(6.3));
  }
  SUBCASE("identical runs collapse the band") {
    const std::vector<double> v(7, 0.25);
    const ReplicateSummary s = replicate_statistics(v);
    CHECK(s.trimmed_mean == 0.25);
    CHECK(s.p10 == 0.25);
    CHECK(s.p90 == 0.25);
  }
  SUBCASE("properties on generated samples") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> size(3, 40);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> v(static_cast<std::size_t>(size(rng)));
      for (double& x : v) x = g(rng);
      const ReplicateSummary s = replicate_statistics(v);
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      CHECK(*lo <= s.p10);
      CHECK(s.p10 <= s.p90);
      CHECK(s.p90 <= *hi);
      CHECK(s.trimmed_mean >= *lo);
      CHECK(s.trimmed_mean <= *hi);
      // shifting every value shifts every statistic
      std::vector<double> shifted = v;
      for (double& x : shifted) x += 3.0;
      const ReplicateSummary t = replicate_statistics(shifted);
      CHECK(t.trimmed_mean == doctest::Approx(s.trimmed_mean + 3.0));
      CHECK(t.p90 == doctest::Approx(s.p90 + 3.0));
    }
  }
  SUBCASE("refusals and NaN") {
    const std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(replicate_statistics(two), ConfigError);
    const std::vector<double> with_nan{1.0, std::nan(""), 2.0};
    CHECK(std::isnan(replicate_statistics(with_nan).trimmed_mean));
  }
}

TEST_CASE("p-tVMC replicate end to end, with resume") {
  const fs::path out = scratch("ptvmc");
  const ExperimentConfig c = small_config(out);
  const RunResult r = run_replicate(c, 0);
  CHECK(r.directory == out / "run_00");
  CHECK(r.record.steps.size() == 3u);
  for (const char* f : {"config.txt", "manifest.txt", "blocks.csv", "fig2_observables.csv", "fig2_infidelity.csv",
                        "fig3_amplitude_phase.csv"}) {
    CHECK(fs::exists(r.directory / f));
  }
  CHECK(render_config(load_config(r.directory / "config.txt")) == render_config(c));

  const CsvTable obs = read_csv(r.directory / "fig2_observables.csv");
  REQUIRE(obs.rows.size() == 4u);
  CHECK(std::stod(obs.rows[0][obs.column("sigma_x_mid")]) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::stod(obs.rows[3][obs.column("t")]) == doctest::Approx(0.3));
  const CsvTable inf = read_csv(r.directory / "fig2_infidelity.csv");
  CHECK(std::stod(inf.rows[0][inf.column("accumulated_error")]) == 0.0);
  CHECK(std::stod(inf.rows[3][inf.column("accumulated_error")]) > 0.0);
  const CsvTable ap = read_csv(r.directory / "fig3_amplitude_phase.csv");
  CHECK(ap.rows.size() == 8u);  // rank 500 exceeds 2^4 and is skipped
  const CsvTable blocks = read_csv(r.directory / "blocks.csv");
  const std::size_t per_step = trotter_schedule(post_quench_model(c), 2, 0.1).size();
  CHECK(blocks.rows.size() == 3u * per_step);

  // merits are a pure function of the run directory
  const std::string before = file_bytes(r.directory / "fig2_observables.csv");
  write_merits(r.directory, compute_merits(r.directory));
  CHECK(file_bytes(r.directory / "fig2_observables.csv") == before);

  // interrupt after step 1 and resume: bit-identical checkpoints and tables
  const fs::path copy = out / "run_01";
  fs::copy(r.directory, copy, fs::copy_options::recursive);
  fs::remove(checkpoint_path(copy, 2));
  fs::remove(checkpoint_path(copy, 3));
  const RunResult resumed = resume_replicate(copy);
  CHECK(resumed.record.steps.size() == 2u);
  CHECK(file_bytes(checkpoint_path(copy, 3)) == file_bytes(checkpoint_path(r.directory, 3)));
  CHECK(file_bytes(copy / "blocks.csv") == file_bytes(r.directory / "blocks.csv"));
  CHECK(file_bytes(copy / "fig2_infidelity.csv") == file_bytes(r.directory / "fig2_infidelity.csv"));

  // two identical replicates and a third: statistics need three runs
  CHECK_THROWS_AS(summarize_runs(out), ConfigError);
  run_replicate(c, 2);
  const auto written = summarize_runs(out);
  CHECK(written.size() == 3u);
  const CsvTable summary = read_csv(out / "summary_fig2_observables.csv");
  CHECK(summary.header.back() == "runs");
  CHECK(summary.rows.size() == 4u * 6u);
  fs::remove_all(out);
}

TEST_CASE("tVMC replicate records on the interval grid") {
  const fs::path out = scratch("tvmc");
  ExperimentConfig c = small_config(out);
  c.num_sites = 3;
  c.method = Method::tvmc;
  c.sampler.mode = SamplingMode::full_summation;
  c.dt = 0.01;
  c.record_interval = 0.05;
  c.t_final = 0.1;
  // at zero weights the hidden units have vanishing log-derivatives
  c.init_noise = 0.05;
  const RunResult r = run_replicate(c, 0);
  CHECK(r.record.steps.size() == 2u);
  const CsvTable obs = read_csv(r.directory / "fig2_observables.csv");
  REQUIRE(obs.rows.size() == 3u);
  CHECK(obs.rows[1][obs.column("step")] == "5");
  const double sx = std::stod(obs.rows[2][obs.column("sigma_x_mid")]);
  const double ex = std::stod(obs.rows[2][obs.column("exact_sigma_x_mid")]);
  CHECK(std::abs(sx - ex) <= 1e-2);
  CHECK(fs::exists(r.directory / "tvmc_solver.csv"));
  fs::remove_all(out);
}
