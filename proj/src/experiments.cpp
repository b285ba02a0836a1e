#include "coalflow/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "coalflow/cbm.hpp"
#include "coalflow/crw.hpp"
#include "json.hpp"

namespace coalflow {

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          error_message = e.what();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed.load()) throw Error("parallel_for worker failed: " + error_message);
}

MapModel make_model(const std::string& name, double bias) {
  if (name == "lattice_shuffle") return MapModel::lattice_shuffle(bias);
  if (name == "continuous_shift") return MapModel::continuous_shift(bias);
  throw ConfigError("unknown model '" + name + "'");
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string timestamp_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::vector<double> eval_grid(double half, int points) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) {
    g[i] = points == 1
               ? 0.0
               : -half + 2.0 * half * static_cast<double>(i) /
                             static_cast<double>(points - 1);
  }
  return g;
}

std::string diagnostics_csv_header() {
  return "n,diagnostic,value,ci_lo,ci_hi,n_samples\n";
}

void append_diagnostic_row(std::string& csv, double n, const Diagnostic& d) {
  csv += fmt(n);
  csv += ',' + d.name + ',' + fmt(d.value) + ',' + fmt(d.ci_lo) + ',' +
         fmt(d.ci_hi) + ',' + std::to_string(d.n_samples) + '\n';
}

std::string ratefit_csv(const std::map<std::string, RateFit>& fits) {
  std::string csv = "diagnostic,exponent,ci_lo,ci_hi,r2\n";
  for (const auto& [name, fit] : fits) {
    csv += name + ',' + fmt(fit.exponent) + ',' + fmt(fit.ci_lo) + ',' +
           fmt(fit.ci_hi) + ',' + fmt(fit.r2) + '\n';
  }
  return csv;
}

nlohmann::json fit_to_json(const RateFit& fit) {
  nlohmann::json j;
  j["exponent"] = fit.exponent;
  j["ci_lo"] = fit.ci_lo;
  j["ci_hi"] = fit.ci_hi;
  j["r2"] = fit.r2;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : fit.points) pts.push_back({{"n", p.n}, {"distance", p.distance}});
  j["points"] = pts;
  return j;
}

void finalize_manifest(RunManifest& manifest, const std::string& out_dir,
                       const std::vector<std::string>& files) {
  for (const auto& f : files) manifest.add_output(out_dir, f);
  manifest.write(out_dir);
}

}  // namespace

// ---------------------------------------------------------------------------
// Rate experiment
// ---------------------------------------------------------------------------

std::map<std::string, std::string> RateExperimentConfig::to_params() const {
  std::map<std::string, std::string> p;
  p["model"] = model;
  p["bias"] = fmt(bias);
  std::string grid;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    grid += (i ? "," : "") + std::to_string(n_grid[i]);
  }
  p["n_grid"] = grid;
  p["ensemble"] = std::to_string(ensemble);
  p["grid_points"] = std::to_string(grid_points);
  p["grid_D"] = fmt(grid_D);
  p["cbm_dt"] = fmt(cbm_dt);
  p["seed"] = std::to_string(seed);
  return p;
}

RateExperimentConfig RateExperimentConfig::from_params(
    const std::map<std::string, std::string>& params) {
  RateExperimentConfig c;
  auto get = [&](const char* k) -> const std::string* {
    const auto it = params.find(k);
    return it == params.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("model")) c.model = *v;
  if (const auto* v = get("bias")) c.bias = std::stod(*v);
  if (const auto* v = get("n_grid")) {
    c.n_grid.clear();
    std::istringstream in(*v);
    std::string item;
    while (std::getline(in, item, ',')) c.n_grid.push_back(std::stoi(item));
  }
  if (const auto* v = get("ensemble")) c.ensemble = std::stoull(*v);
  if (const auto* v = get("grid_points")) c.grid_points = std::stoi(*v);
  if (const auto* v = get("grid_D")) c.grid_D = std::stod(*v);
  if (const auto* v = get("cbm_dt")) c.cbm_dt = std::stod(*v);
  if (const auto* v = get("seed")) c.seed = std::stoull(*v);
  return c;
}

RateExperimentResult run_rate_experiment(const RateExperimentConfig& config) {
  if (config.n_grid.size() < 4) {
    throw ConfigError("rate experiment: need at least 4 n values for the fit");
  }
  if (config.grid_points < 2 || config.grid_points > 11) {
    throw ConfigError("rate experiment: grid_points must be in [2, 11]");
  }
  RateExperimentResult result;
  if (config.ensemble < 100) {
    result.warnings.push_back(
        "ensemble size " + std::to_string(config.ensemble) +
        " gives very wide bootstrap CIs; results are indicative only");
  }
  const MapModel model = make_model(config.model, config.bias);

  std::map<std::string, std::vector<Diagnostic>> per_diag_sequences;
  for (int n : config.n_grid) {
    const double half = config.grid_D * std::log(static_cast<double>(n));
    const std::vector<double> grid = eval_grid(half, config.grid_points);

    std::vector<std::vector<double>> crw(config.ensemble);
    const std::string crw_tag = "rate-crw-" + std::to_string(n);
    parallel_for(config.ensemble, config.threads, [&](std::size_t i) {
      RngStream s = make_stream(config.seed, crw_tag, i);
      crw[i] = rescaled_transport(model, n, grid, s);
    });

    std::vector<std::vector<double>> cbm(config.ensemble);
    const std::string cbm_tag = "rate-cbm-" + std::to_string(n);
    parallel_for(config.ensemble, config.threads, [&](std::size_t i) {
      RngStream s = make_stream(config.seed, cbm_tag, i);
      cbm[i] = transport_map_sample(grid, 1.0, config.cbm_dt, s);
    });

    RngStream boot =
        make_stream(config.seed, "rate-boot-" + std::to_string(n));
    for (auto& d : ensemble_diagnostics(crw, cbm, boot)) {
      result.table.push_back({n, d});
      per_diag_sequences[d.name].push_back(d);
    }
  }

  RngStream fit_rng = make_stream(config.seed, "rate-fit");
  for (const auto& [name, seq] : per_diag_sequences) {
    std::vector<RatePoint> pts;
    for (std::size_t k = 0; k < seq.size(); ++k) {
      pts.push_back({static_cast<double>(config.n_grid[k]),
                     std::max(seq[k].value, 1e-300)});
    }
    result.fits[name] = fit_power_law(pts, fit_rng);
  }

  if (!config.out_dir.empty()) {
    std::string csv = diagnostics_csv_header();
    for (const auto& row : result.table) {
      append_diagnostic_row(csv, row.n, row.diagnostic);
    }
    write_file(config.out_dir + "/distances.csv", csv);
    write_file(config.out_dir + "/ratefit.csv", ratefit_csv(result.fits));

    nlohmann::json summary;
    summary["schema_version"] = 1;
    summary["experiment"] = "rate-fit";
    summary["model"] = model.name();
    summary["sigma2"] = model.sigma2();
    for (const auto& [name, fit] : result.fits) {
      summary["fits"][name] = fit_to_json(fit);
    }
    summary["warnings"] = result.warnings;
    write_file(config.out_dir + "/summary.json", summary.dump(2));

    RunManifest manifest;
    manifest.artifact_version = kArtifactVersion;
    manifest.command = "rate-fit";
    manifest.parameters = config.to_params();
    manifest.master_seed = config.seed;
    manifest.stream_rule = kStreamRule;
    manifest.timestamp = timestamp_now();
    result.output_files = {"distances.csv", "ratefit.csv", "summary.json"};
    finalize_manifest(manifest, config.out_dir, result.output_files);
  }
  return result;
}

bool nonincreasing_up_to_noise(const std::vector<Diagnostic>& sequence,
                               double factor) {
  for (std::size_t k = 1; k < sequence.size(); ++k) {
    const double hw_prev =
        0.5 * (sequence[k - 1].ci_hi - sequence[k - 1].ci_lo);
    const double hw = 0.5 * (sequence[k].ci_hi - sequence[k].ci_lo);
    const double noise = std::sqrt(hw * hw + hw_prev * hw_prev);
    if (sequence[k].value > sequence[k - 1].value + factor * noise) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Renormalization experiment
// ---------------------------------------------------------------------------

std::map<std::string, std::string> RenormExperimentConfig::to_params() const {
  std::map<std::string, std::string> p;
  p["model"] = model;
  p["bias"] = fmt(bias);
  p["generations"] = std::to_string(generations);
  p["ensemble"] = std::to_string(ensemble);
  p["grid_points"] = std::to_string(grid_points);
  p["grid_half"] = fmt(grid_half);
  p["reference_size"] = std::to_string(reference_size);
  p["direct_size"] = std::to_string(direct_size);
  p["cbm_dt"] = fmt(cbm_dt);
  p["seed"] = std::to_string(seed);
  return p;
}

RenormExperimentConfig RenormExperimentConfig::from_params(
    const std::map<std::string, std::string>& params) {
  RenormExperimentConfig c;
  auto get = [&](const char* k) -> const std::string* {
    const auto it = params.find(k);
    return it == params.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("model")) c.model = *v;
  if (const auto* v = get("bias")) c.bias = std::stod(*v);
  if (const auto* v = get("generations")) c.generations = std::stoi(*v);
  if (const auto* v = get("ensemble")) c.ensemble = std::stoull(*v);
  if (const auto* v = get("grid_points")) c.grid_points = std::stoi(*v);
  if (const auto* v = get("grid_half")) c.grid_half = std::stod(*v);
  if (const auto* v = get("reference_size")) c.reference_size = std::stoull(*v);
  if (const auto* v = get("direct_size")) c.direct_size = std::stoull(*v);
  if (const auto* v = get("cbm_dt")) c.cbm_dt = std::stod(*v);
  if (const auto* v = get("seed")) c.seed = std::stoull(*v);
  return c;
}

RenormExperimentResult run_renorm_experiment(
    const RenormExperimentConfig& config) {
  RenormExperimentResult result;
  const MapModel model = make_model(config.model, config.bias);
  const std::vector<double> grid =
      eval_grid(config.grid_half, config.grid_points);

  RngStream flow_rng = make_stream(config.seed, "renorm-flow");
  result.flow = renorm_flow(model, config.generations, config.ensemble, grid,
                            config.reference_size, config.cbm_dt, flow_rng);

  if (config.direct_size > 0) {
    RngStream ref_rng = make_stream(config.seed, "renorm-direct-ref");
    const auto reference = cbm_reference_ensemble(
        grid, 1.0, config.cbm_dt, config.reference_size, ref_rng);
    for (int gen = 0; gen <= config.generations; ++gen) {
      const int n = 1 << gen;
      std::vector<std::vector<double>> direct(config.direct_size);
      const std::string tag = "renorm-direct-" + std::to_string(gen);
      parallel_for(config.direct_size, config.threads, [&](std::size_t i) {
        RngStream s = make_stream(config.seed, tag, i);
        direct[i] = rescaled_transport(model, n, grid, s);
      });
      RngStream boot =
          make_stream(config.seed, "renorm-direct-boot-" + std::to_string(gen));
      GenerationDiagnostics gd;
      gd.generation = gen;
      gd.ensemble_size = config.direct_size;
      gd.diagnostics = ensemble_diagnostics(direct, reference, boot);
      result.direct.push_back(std::move(gd));
    }
  }

  // decay fit per diagnostic over n = 2^m
  {
    std::map<std::string, std::vector<RatePoint>> pts;
    for (const auto& gd : result.flow) {
      for (const auto& d : gd.diagnostics) {
        pts[d.name].push_back({std::pow(2.0, gd.generation),
                               std::max(d.value, 1e-300)});
      }
    }
    RngStream fit_rng = make_stream(config.seed, "renorm-fit");
    for (const auto& [name, p] : pts) {
      if (p.size() >= 4) result.fits[name] = fit_power_law(p, fit_rng);
    }
  }

  if (!config.out_dir.empty()) {
    std::string csv = "generation,diagnostic,value,ci_lo,ci_hi,n_samples\n";
    for (const auto& gd : result.flow) {
      for (const auto& d : gd.diagnostics) {
        append_diagnostic_row(csv, gd.generation, d);
      }
    }
    write_file(config.out_dir + "/generations.csv", csv);
    result.output_files = {"generations.csv"};

    if (!result.direct.empty()) {
      std::string dcsv = "generation,diagnostic,value,ci_lo,ci_hi,n_samples\n";
      for (const auto& gd : result.direct) {
        for (const auto& d : gd.diagnostics) {
          append_diagnostic_row(dcsv, gd.generation, d);
        }
      }
      write_file(config.out_dir + "/direct.csv", dcsv);
      result.output_files.push_back("direct.csv");
    }

    nlohmann::json summary;
    summary["schema_version"] = 1;
    summary["experiment"] = "renorm";
    summary["model"] = model.name();
    summary["sigma2"] = model.sigma2();
    for (const auto& [name, fit] : result.fits) {
      summary["fits"][name] = fit_to_json(fit);
      summary["contraction_per_generation"][name] =
          std::pow(2.0, -fit.exponent);
    }
    write_file(config.out_dir + "/summary.json", summary.dump(2));
    result.output_files.push_back("summary.json");

    RunManifest manifest;
    manifest.artifact_version = kArtifactVersion;
    manifest.command = "renorm";
    manifest.parameters = config.to_params();
    manifest.master_seed = config.seed;
    manifest.stream_rule = kStreamRule;
    manifest.timestamp = timestamp_now();
    finalize_manifest(manifest, config.out_dir, result.output_files);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Appendix suite
// ---------------------------------------------------------------------------

std::map<std::string, std::string> AppendixSuiteConfig::to_params() const {
  std::map<std::string, std::string> p;
  p["model"] = model;
  p["bias"] = fmt(bias);
  p["reflection_reps"] = std::to_string(reflection_reps);
  p["gap_tail_reps"] = std::to_string(gap_tail_reps);
  p["displacement_reps"] = std::to_string(displacement_reps);
  p["three_particle_reps"] = std::to_string(three_particle_reps);
  p["drift_reps_per_bin"] = std::to_string(drift_reps_per_bin);
  p["assumption_reps"] = std::to_string(assumption_reps);
  p["hitting_dt"] = fmt(hitting_dt);
  p["seed"] = std::to_string(seed);
  return p;
}

AppendixSuiteConfig AppendixSuiteConfig::from_params(
    const std::map<std::string, std::string>& params) {
  AppendixSuiteConfig c;
  auto get = [&](const char* k) -> const std::string* {
    const auto it = params.find(k);
    return it == params.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("model")) c.model = *v;
  if (const auto* v = get("bias")) c.bias = std::stod(*v);
  if (const auto* v = get("reflection_reps")) c.reflection_reps = std::stoull(*v);
  if (const auto* v = get("gap_tail_reps")) c.gap_tail_reps = std::stoull(*v);
  if (const auto* v = get("displacement_reps")) {
    c.displacement_reps = std::stoull(*v);
  }
  if (const auto* v = get("three_particle_reps")) {
    c.three_particle_reps = std::stoull(*v);
  }
  if (const auto* v = get("drift_reps_per_bin")) {
    c.drift_reps_per_bin = std::stoull(*v);
  }
  if (const auto* v = get("assumption_reps")) c.assumption_reps = std::stoull(*v);
  if (const auto* v = get("hitting_dt")) c.hitting_dt = std::stod(*v);
  if (const auto* v = get("seed")) c.seed = std::stoull(*v);
  return c;
}

AppendixSuiteResult run_appendix_suite(const AppendixSuiteConfig& config) {
  AppendixSuiteResult result;
  const MapModel model = make_model(config.model, config.bias);

  {
    RngStream rng = make_stream(config.seed, "assumptions");
    result.assumptions =
        validate_assumptions(model, config.assumption_reps, rng);
  }
  {
    RngStream rng = make_stream(config.seed, "reflection-1-1");
    for (auto& r :
         reflection_check(1.0, 1.0, 1.0, config.reflection_reps, rng,
                          config.hitting_dt)) {
      r.name += "_a1_T1";
      result.reports.push_back(std::move(r));
    }
  }
  {
    RngStream rng = make_stream(config.seed, "reflection-1-4");
    for (auto& r :
         reflection_check(1.0, 4.0, 1.0, config.reflection_reps, rng,
                          config.hitting_dt)) {
      r.name += "_a1_T4";
      result.reports.push_back(std::move(r));
    }
  }
  {
    RngStream rng = make_stream(config.seed, "gap-tail");
    result.reports.push_back(gap_tail_check(model, 4.0,
                                            {8, 16, 32, 64, 128, 256, 512},
                                            0.45, 0.49, config.gap_tail_reps,
                                            rng));
  }
  {
    RngStream rng = make_stream(config.seed, "displacement");
    result.reports.push_back(displacement_check(
        model, 256, {16.0, 24.0, 32.0, 48.0, 64.0, 96.0},
        config.displacement_reps, rng));
  }
  {
    RngStream rng = make_stream(config.seed, "three-particle");
    result.reports.push_back(three_particle_check(
        {0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64}, 0.4,
        config.three_particle_reps, config.hitting_dt, rng));
  }
  {
    RngStream rng = make_stream(config.seed, "drift");
    result.reports.push_back(drift_condition_check(
        model, 0.4, 10.0, config.drift_reps_per_bin, rng));
  }

  result.all_passed = result.assumptions.passed();
  for (const auto& r : result.reports) result.all_passed &= r.passed;

  if (!config.out_dir.empty()) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["experiment"] = "appendix-check";
    j["model"] = model.name();
    j["all_passed"] = result.all_passed;
    j["reports"] = nlohmann::json::parse(reports_to_json(result.reports));
    nlohmann::json assumptions = nlohmann::json::array();
    for (const auto& item : result.assumptions.items) {
      assumptions.push_back({{"name", item.name},
                             {"passed", item.passed},
                             {"value", item.value},
                             {"detail", item.detail}});
    }
    j["assumptions"] = assumptions;
    write_file(config.out_dir + "/reports.json", j.dump(2));
    result.output_files = {"reports.json"};

    RunManifest manifest;
    manifest.artifact_version = kArtifactVersion;
    manifest.command = "appendix-check";
    manifest.parameters = config.to_params();
    manifest.master_seed = config.seed;
    manifest.stream_rule = kStreamRule;
    manifest.timestamp = timestamp_now();
    finalize_manifest(manifest, config.out_dir, result.output_files);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

void run_command_from_params(const std::string& command,
                             const std::map<std::string, std::string>& params,
                             const std::string& out_dir) {
  if (command == "rate-fit") {
    auto cfg = RateExperimentConfig::from_params(params);
    cfg.out_dir = out_dir;
    run_rate_experiment(cfg);
  } else if (command == "renorm") {
    auto cfg = RenormExperimentConfig::from_params(params);
    cfg.out_dir = out_dir;
    run_renorm_experiment(cfg);
  } else if (command == "appendix-check") {
    auto cfg = AppendixSuiteConfig::from_params(params);
    cfg.out_dir = out_dir;
    run_appendix_suite(cfg);
  } else {
    throw ConfigError("replay: unsupported command '" + command + "'");
  }
}

std::vector<std::string> replay_manifest(const std::string& manifest_path,
                                         const std::string& scratch_dir) {
  const RunManifest manifest = RunManifest::load(manifest_path);
  run_command_from_params(manifest.command, manifest.parameters, scratch_dir);
  std::vector<std::string> mismatched;
  for (const auto& [file, digest] : manifest.outputs) {
    const std::string replayed = sha256_file(scratch_dir + "/" + file);
    if (replayed != digest) mismatched.push_back(file);
  }
  return mismatched;
}

}  // namespace coalflow
