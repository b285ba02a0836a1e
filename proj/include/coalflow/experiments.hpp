#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "coalflow/checks.hpp"
#include "coalflow/manifest.hpp"
#include "coalflow/map_model.hpp"
#include "coalflow/renorm.hpp"
#include "coalflow/stats.hpp"

namespace coalflow {

// Runs fn(i) for i = 0..n-1 on `threads` workers (0 = hardware concurrency).
// Replicas own their index-derived state, so results land in caller-provided
// slots and downstream reductions are independent of scheduling.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

MapModel make_model(const std::string& name, double bias);

// ---------------------------------------------------------------------------
// Rate experiment (iterated maps vs the CBM fixed point)
// ---------------------------------------------------------------------------

struct RateExperimentConfig {
  std::string model = "lattice_shuffle";
  double bias = 0.0;
  std::vector<int> n_grid = {16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
  std::size_t ensemble = 10000;
  int grid_points = 9;       // evaluation points, evenly spaced
  double grid_D = 2.0;       // on [-D ln n, D ln n]
  double cbm_dt = 1e-3;      // reference simulation step
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir;       // empty: no files

  std::map<std::string, std::string> to_params() const;
  static RateExperimentConfig from_params(
      const std::map<std::string, std::string>& params);
};

struct RateExperimentResult {
  // per n, the diagnostics against the CBM reference
  struct Row {
    int n = 0;
    Diagnostic diagnostic;
  };
  std::vector<Row> table;
  std::map<std::string, RateFit> fits;  // per diagnostic name
  std::vector<std::string> warnings;
  std::vector<std::string> output_files;
};

RateExperimentResult run_rate_experiment(const RateExperimentConfig& config);

// d_{k+1} <= d_k + 2 sqrt(noise_k^2 + noise_{k+1}^2), CI half-widths as noise.
bool nonincreasing_up_to_noise(const std::vector<Diagnostic>& sequence,
                               double factor = 2.0);

// ---------------------------------------------------------------------------
// Renormalization experiment
// ---------------------------------------------------------------------------

struct RenormExperimentConfig {
  std::string model = "lattice_shuffle";
  double bias = 0.0;
  int generations = 6;
  std::size_t ensemble = 1000;       // size at the last generation
  int grid_points = 5;
  double grid_half = 2.0;            // evaluation grid on [-half, half]
  std::size_t reference_size = 10000;
  std::size_t direct_size = 10000;   // rescaled_transport ensembles (0: skip)
  double cbm_dt = 1e-3;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir;

  std::map<std::string, std::string> to_params() const;
  static RenormExperimentConfig from_params(
      const std::map<std::string, std::string>& params);
};

struct RenormExperimentResult {
  std::vector<GenerationDiagnostics> flow;
  // direct-iteration diagnostics at n = 2^m for the consistency check
  std::vector<GenerationDiagnostics> direct;
  std::map<std::string, RateFit> fits;  // diagnostic decay vs n = 2^m
  std::vector<std::string> output_files;
};

RenormExperimentResult run_renorm_experiment(
    const RenormExperimentConfig& config);

// ---------------------------------------------------------------------------
// Appendix suite
// ---------------------------------------------------------------------------

struct AppendixSuiteConfig {
  std::string model = "lattice_shuffle";
  double bias = 0.0;
  std::size_t reflection_reps = 20000;
  std::size_t gap_tail_reps = 20000;
  std::size_t displacement_reps = 20000;
  std::size_t three_particle_reps = 10000;
  std::size_t drift_reps_per_bin = 64000;
  std::size_t assumption_reps = 2000;
  double hitting_dt = 1e-4;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir;

  std::map<std::string, std::string> to_params() const;
  static AppendixSuiteConfig from_params(
      const std::map<std::string, std::string>& params);
};

struct AppendixSuiteResult {
  std::vector<BoundCheckReport> reports;
  AssumptionReport assumptions;
  bool all_passed = false;
  std::vector<std::string> output_files;
};

AppendixSuiteResult run_appendix_suite(const AppendixSuiteConfig& config);

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

// Re-runs the manifest's command with its recorded parameters into
// `scratch_dir` and compares output digests.  Returns the mismatched files
// (empty = bit-for-bit reproduction).
std::vector<std::string> replay_manifest(const std::string& manifest_path,
                                         const std::string& scratch_dir);

// Dispatch used by the CLI and by replay_manifest.
void run_command_from_params(const std::string& command,
                             const std::map<std::string, std::string>& params,
                             const std::string& out_dir);

}  // namespace coalflow
