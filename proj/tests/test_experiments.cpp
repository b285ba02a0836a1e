#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "coalflow/experiments.hpp"
#include "coalflow/manifest.hpp"
#include "doctest.h"

using namespace coalflow;

namespace {

std::string temp_dir(const std::string& tag) {
  const auto dir =
      std::filesystem::temp_directory_path() / ("coalflow_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_SUITE_BEGIN("experiments");

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::string million(1000000, 'a');
  CHECK(sha256_hex(million) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("config parser: schema, types, unknown keys with line numbers") {
  const KeyValueConfig cfg = KeyValueConfig::parse_text(
      "# comment\nschema = 1\nmodel = lattice_shuffle\nensemble = 250\n"
      "grid_D = 2.5\nn_grid = 16,32,64\n");
  CHECK(cfg.get_string("model", "") == "lattice_shuffle");
  CHECK(cfg.get_int("ensemble", 0) == 250);
  CHECK(cfg.get_double("grid_D", 0.0) == 2.5);
  CHECK(cfg.get_list("n_grid", {}) == std::vector<double>{16, 32, 64});
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK_NOTHROW(cfg.require_keys({"model", "ensemble", "grid_D", "n_grid"}));

  try {
    cfg.require_keys({"model"});
    CHECK(false);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":4") != std::string::npos);  // ensemble on line 4
    CHECK(msg.find("unknown key") != std::string::npos);
  }

  CHECK_THROWS_AS(KeyValueConfig::parse_text("model = x\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse_text("schema = 2\n"), ConfigError);
  CHECK_THROWS_AS(
      KeyValueConfig::parse_text("schema = 1\nschema = 1\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse_text("schema = 1\nbad line\n"),
                  ConfigError);

  const KeyValueConfig typo =
      KeyValueConfig::parse_text("schema = 1\nensemble = ten\n");
  CHECK_THROWS_AS(typo.get_int("ensemble", 0), ConfigError);
}

TEST_CASE("parallel_for fills every slot regardless of thread count") {
  std::vector<int> slots(500, 0);
  parallel_for(slots.size(), 4, [&](std::size_t i) {
    slots[i] = static_cast<int>(i) + 1;
  });
  for (std::size_t i = 0; i < slots.size(); ++i) {
    REQUIRE(slots[i] == static_cast<int>(i) + 1);
  }
  CHECK_THROWS_AS(
      parallel_for(8, 2, [](std::size_t i) {
        if (i == 5) throw Error("boom");
      }),
      Error);
}

TEST_CASE("rate experiment: thread independence, manifest replay, warnings") {
  RateExperimentConfig cfg;
  cfg.model = "lattice_shuffle";
  cfg.n_grid = {4, 8, 16, 32};
  cfg.ensemble = 300;
  cfg.grid_points = 3;
  cfg.cbm_dt = 0.01;
  cfg.seed = 99;

  const std::string dir1 = temp_dir("rate1");
  const std::string dir4 = temp_dir("rate4");
  cfg.threads = 1;
  cfg.out_dir = dir1;
  const RateExperimentResult r1 = run_rate_experiment(cfg);
  cfg.threads = 4;
  cfg.out_dir = dir4;
  const RateExperimentResult r4 = run_rate_experiment(cfg);

  REQUIRE(r1.output_files == r4.output_files);
  for (const auto& file : r1.output_files) {
    CHECK(sha256_file(dir1 + "/" + file) == sha256_file(dir4 + "/" + file));
  }
  CHECK(r1.warnings.empty());
  CHECK(r1.fits.count("pair_coalescence") == 1);
  CHECK(r1.fits.count("w1_point") == 1);

  // replay reproduces the digests bit-for-bit
  const std::string scratch = temp_dir("rate_replay");
  CHECK(replay_manifest(dir1 + "/manifest.json", scratch).empty());

  // degraded mode still runs but warns
  cfg.ensemble = 10;
  cfg.out_dir.clear();
  const RateExperimentResult tiny = run_rate_experiment(cfg);
  REQUIRE_FALSE(tiny.warnings.empty());
  CHECK(tiny.warnings.front().find("CI") != std::string::npos);
}

TEST_CASE("renorm experiment writes per-generation diagnostics and fits") {
  RenormExperimentConfig cfg;
  cfg.model = "lattice_shuffle";
  cfg.generations = 2;
  cfg.ensemble = 100;
  cfg.grid_points = 3;
  cfg.grid_half = 1.5;
  cfg.reference_size = 500;
  cfg.direct_size = 400;
  cfg.cbm_dt = 0.02;
  cfg.seed = 3;
  cfg.threads = 2;
  const std::string dir = temp_dir("renorm");
  cfg.out_dir = dir;
  const RenormExperimentResult r = run_renorm_experiment(cfg);
  REQUIRE(r.flow.size() == 3);
  REQUIRE(r.direct.size() == 3);
  CHECK(std::filesystem::exists(dir + "/generations.csv"));
  CHECK(std::filesystem::exists(dir + "/direct.csv"));
  CHECK(std::filesystem::exists(dir + "/summary.json"));
  CHECK(std::filesystem::exists(dir + "/manifest.json"));
  // generations=0 baseline-only mode
  cfg.generations = 0;
  cfg.direct_size = 0;
  cfg.out_dir.clear();
  const RenormExperimentResult base = run_renorm_experiment(cfg);
  CHECK(base.flow.size() == 1);
  CHECK(base.direct.empty());
}

TEST_CASE("appendix suite catches an injected mean-shift fault") {
  AppendixSuiteConfig cfg;
  cfg.model = "lattice_shuffle";
  cfg.bias = 0.2;  // jump-law mean 0.2: (A2) must fail
  cfg.reflection_reps = 1000;
  cfg.gap_tail_reps = 1000;
  cfg.displacement_reps = 800;
  cfg.three_particle_reps = 500;
  cfg.drift_reps_per_bin = 1500;
  cfg.assumption_reps = 1000;
  cfg.hitting_dt = 1e-3;
  cfg.seed = 5;
  const AppendixSuiteResult result = run_appendix_suite(cfg);
  CHECK_FALSE(result.assumptions.passed());
  CHECK_FALSE(result.all_passed);
  bool a2 = true;
  for (const auto& item : result.assumptions.items) {
    if (item.name == "A2_mean_zero") a2 = item.passed;
  }
  CHECK_FALSE(a2);
}

TEST_CASE("appendix suite verdicts are stable across seeds") {
  AppendixSuiteConfig cfg;
  cfg.model = "lattice_shuffle";
  cfg.reflection_reps = 4000;
  cfg.gap_tail_reps = 4000;
  cfg.displacement_reps = 2500;
  cfg.three_particle_reps = 1500;
  cfg.drift_reps_per_bin = 12000;
  cfg.assumption_reps = 1000;
  cfg.hitting_dt = 5e-4;
  cfg.seed = 11;
  const AppendixSuiteResult a = run_appendix_suite(cfg);
  cfg.seed = 12;
  const AppendixSuiteResult b = run_appendix_suite(cfg);
  CHECK(a.all_passed);
  CHECK(b.all_passed);
  REQUIRE(a.reports.size() == b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    CHECK(a.reports[i].passed == b.reports[i].passed);
    CHECK(a.reports[i].name == b.reports[i].name);
    // values move with the seed (they are estimates, not constants)
  }
}

TEST_CASE("manifest round-trips through json") {
  RunManifest m;
  m.artifact_version = kArtifactVersion;
  m.command = "rate-fit";
  m.parameters = {{"model", "lattice_shuffle"}, {"seed", "7"}};
  m.master_seed = 7;
  m.stream_rule = kStreamRule;
  m.timestamp = "2026-01-01T00:00:00Z";
  m.outputs = {{"a.csv", sha256_hex("hello")}};
  const RunManifest back = RunManifest::from_json(m.to_json());
  CHECK(back.command == m.command);
  CHECK(back.parameters == m.parameters);
  CHECK(back.master_seed == m.master_seed);
  CHECK(back.outputs == m.outputs);
}

TEST_SUITE_END();
