// coalflow command-line interface: simulation dumps, experiment runners, and
// manifest replay.  Exit codes: 0 pass, 1 check failure, 2 config error.

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coalflow/cbm.hpp"
#include "coalflow/crw.hpp"
#include "coalflow/experiments.hpp"
#include "coalflow/manifest.hpp"
#include "coalflow/map_model.hpp"
#include "coalflow/stats.hpp"
#include "json.hpp"

namespace {

using namespace coalflow;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string now_utc() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::vector<double> parse_starts(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw ConfigError("empty starts list");
  return out;
}

RunManifest base_manifest(const std::string& command, std::uint64_t seed) {
  RunManifest m;
  m.artifact_version = kArtifactVersion;
  m.command = command;
  m.master_seed = seed;
  m.stream_rule = kStreamRule;
  m.timestamp = now_utc();
  return m;
}

int cmd_simulate_cbm(const std::string& starts_text, double T, double dt,
                     bool no_bridge, std::uint64_t seed,
                     const std::string& out_dir, const std::string& format) {
  const std::vector<double> starts = parse_starts(starts_text);
  const RankPermutation sigma = build_sigma(static_cast<int>(starts.size()));
  RngStream rng = make_stream(seed, "simulate-cbm");
  const auto [bundle, followers] =
      simulate_cbm(starts, T, dt, sigma, !no_bridge, rng);

  std::string traj;
  if (format == "csv") {
    traj = "time,particle,position,leader\n";
    for (int k = 0; k <= bundle.steps(); ++k) {
      for (int i = 1; i <= bundle.particles(); ++i) {
        traj += fmt(k * bundle.dt) + ',' + std::to_string(i) + ',' +
                fmt(bundle.paths[i - 1][k]) + ',' +
                std::to_string(followers.leader_at(i, k)) + '\n';
      }
    }
  } else {
    nlohmann::json j;
    j["dt"] = bundle.dt;
    j["paths"] = bundle.paths;
    traj = j.dump(2);
  }
  const std::string traj_file =
      format == "csv" ? "trajectory.csv" : "trajectory.json";
  write_file(out_dir + "/" + traj_file, traj);

  nlohmann::json summary;
  summary["schema_version"] = 1;
  summary["particles"] = bundle.particles();
  summary["dt"] = bundle.dt;
  nlohmann::json events = nlohmann::json::array();
  for (int i = 1; i <= bundle.particles(); ++i) {
    for (const auto& [step, leader] : followers.jumps[i - 1]) {
      if (step == 0) continue;
      events.push_back({{"time", step * bundle.dt},
                        {"particle", i},
                        {"joins", leader}});
    }
  }
  summary["coalescence_events"] = events;
  std::map<int, std::vector<int>> partition;
  for (int i = 1; i <= bundle.particles(); ++i) {
    partition[followers.leader_at(i, bundle.steps())].push_back(i);
  }
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [leader, members] : partition) {
    blocks.push_back({{"leader", leader}, {"members", members}});
  }
  summary["final_partition"] = blocks;
  write_file(out_dir + "/summary.json", summary.dump(2));

  RunManifest manifest = base_manifest("simulate-cbm", seed);
  manifest.parameters = {{"starts", starts_text},
                         {"T", fmt(T)},
                         {"dt", fmt(dt)},
                         {"bridge", no_bridge ? "off" : "on"},
                         {"format", format},
                         {"seed", std::to_string(seed)}};
  manifest.add_output(out_dir, traj_file);
  manifest.add_output(out_dir, "summary.json");
  manifest.write(out_dir);
  std::cout << "wrote " << out_dir << "/" << traj_file << " and summary.json\n";
  return 0;
}

int cmd_simulate_crw(const std::string& model_name, double bias,
                     const std::string& starts_text, int steps,
                     double gap_x0, std::uint64_t seed,
                     const std::string& out_dir, const std::string& format) {
  const MapModel model = make_model(model_name, bias);
  const std::vector<double> starts = parse_starts(starts_text);
  RngStream rng = make_stream(seed, "simulate-crw");
  const DiscretePathBundle bundle = simulate_crw(model, starts, steps, rng);

  std::string traj;
  if (format == "csv") {
    traj = "step,particle,position\n";
    for (int k = 0; k <= bundle.steps(); ++k) {
      for (std::size_t i = 0; i < starts.size(); ++i) {
        traj += std::to_string(k) + ',' + std::to_string(i + 1) + ',' +
                fmt(bundle.positions[k][i]) + '\n';
      }
    }
  } else {
    nlohmann::json j;
    j["positions"] = bundle.positions;
    traj = j.dump(2);
  }
  const std::string traj_file =
      format == "csv" ? "trajectory.csv" : "trajectory.json";
  write_file(out_dir + "/" + traj_file, traj);

  RunManifest manifest = base_manifest("simulate-crw", seed);
  manifest.parameters = {{"model", model_name}, {"bias", fmt(bias)},
                         {"starts", starts_text},
                         {"steps", std::to_string(steps)},
                         {"gap_x0", fmt(gap_x0)},
                         {"format", format},
                         {"seed", std::to_string(seed)}};
  manifest.add_output(out_dir, traj_file);

  if (gap_x0 >= 0.0) {
    RngStream gap_rng = make_stream(seed, "gap-chain");
    const GapChain chain =
        gap_chain(model, gap_x0, steps, gap_rng);
    std::string gap_csv = "step,gap\n";
    for (std::size_t k = 0; k < chain.states.size(); ++k) {
      gap_csv += std::to_string(k) + ',' + fmt(chain.states[k]) + '\n';
    }
    write_file(out_dir + "/gap.csv", gap_csv);
    nlohmann::json hit;
    hit["schema_version"] = 1;
    hit["x0"] = gap_x0;
    hit["absorbed"] = chain.absorbed;
    const auto tau = chain.hit_index(0.0);
    if (tau) {
      hit["tau_0"] = *tau;
    } else {
      hit["tau_0"] = nullptr;
    }
    write_file(out_dir + "/hitting.json", hit.dump(2));
    manifest.add_output(out_dir, "gap.csv");
    manifest.add_output(out_dir, "hitting.json");
  }
  manifest.write(out_dir);
  std::cout << "wrote " << out_dir << "/" << traj_file << "\n";
  return 0;
}

int cmd_validate_model(const std::string& model_name, double bias,
                       std::size_t reps, std::uint64_t seed,
                       const std::string& out_dir) {
  const MapModel model = make_model(model_name, bias);
  RngStream rng = make_stream(seed, "validate-model");
  const AssumptionReport report = validate_assumptions(model, reps, rng);
  for (const auto& item : report.items) {
    std::printf("%-28s %s  %s\n", item.name.c_str(),
                item.passed ? "pass" : "FAIL", item.detail.c_str());
  }
  if (!out_dir.empty()) {
    write_file(out_dir + "/model.spec", model_to_spec(model));
    write_file(out_dir + "/psi_law.csv", psi_law_to_csv(exact_psi_law(model)));
    RunManifest manifest = base_manifest("validate-model", seed);
    manifest.parameters = {{"model", model_name},
                           {"bias", fmt(bias)},
                           {"reps", std::to_string(reps)},
                           {"seed", std::to_string(seed)}};
    manifest.add_output(out_dir, "model.spec");
    manifest.add_output(out_dir, "psi_law.csv");
    manifest.write(out_dir);
  }
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coalflow: coalescing stochastic flow experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", format = "csv";
  std::uint64_t seed = 1;
  int threads = 0;
  app.add_option("--config", config_path, "config file (key = value lines)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--format", format, "trajectory dump format")
      ->check(CLI::IsMember({"csv", "json"}));

  // simulate-cbm
  auto* sim_cbm = app.add_subcommand("simulate-cbm",
                                     "coalescing Brownian motion trajectories");
  std::string starts = "0,1";
  double T = 1.0, dt = 1e-3;
  bool no_bridge = false;
  sim_cbm->add_option("--starts", starts, "comma-separated ordered starts");
  sim_cbm->add_option("--T", T, "time horizon");
  sim_cbm->add_option("--dt", dt, "grid step");
  sim_cbm->add_flag("--no-bridge", no_bridge, "disable bridge coalescence");

  // simulate-crw
  auto* sim_crw = app.add_subcommand("simulate-crw",
                                     "coalescing random walk trajectories");
  std::string model_name = "lattice_shuffle";
  double bias = 0.0;
  int steps = 64;
  double gap_x0 = -1.0;
  sim_crw->add_option("--model", model_name, "lattice_shuffle|continuous_shift");
  sim_crw->add_option("--bias", bias, "jump-law mean shift (diagnostics)");
  sim_crw->add_option("--starts", starts, "comma-separated ordered starts");
  sim_crw->add_option("--steps", steps, "number of composed maps");
  sim_crw->add_option("--gap-x0", gap_x0,
                      "also emit the gap chain from this initial gap");

  // rate-fit
  auto* rate = app.add_subcommand("rate-fit",
                                  "power-law rate experiment vs the CBM fixed point");
  RateExperimentConfig rate_cfg;
  rate->add_option("--model", rate_cfg.model, "map model");
  rate->add_option("--ensemble", rate_cfg.ensemble, "replicas per n");
  rate->add_option("--grid-points", rate_cfg.grid_points, "evaluation points");
  rate->add_option("--grid-D", rate_cfg.grid_D, "grid half-width factor D");
  rate->add_option("--cbm-dt", rate_cfg.cbm_dt, "CBM reference step");

  // renorm
  auto* renorm_cmd = app.add_subcommand("renorm",
                                        "renormalization flow experiment");
  RenormExperimentConfig renorm_cfg;
  renorm_cmd->add_option("--model", renorm_cfg.model, "map model");
  renorm_cmd->add_option("--generations", renorm_cfg.generations, "R steps");
  renorm_cmd->add_option("--ensemble", renorm_cfg.ensemble,
                         "ensemble size at the last generation");
  renorm_cmd->add_option("--reference-size", renorm_cfg.reference_size,
                         "CBM reference draws");
  renorm_cmd->add_option("--direct-size", renorm_cfg.direct_size,
                         "direct-iteration ensemble size (0 = skip)");

  // appendix-check
  auto* appendix = app.add_subcommand("appendix-check",
                                      "statistical checks of the tail bounds");
  AppendixSuiteConfig appendix_cfg;
  appendix->add_option("--model", appendix_cfg.model, "map model");
  appendix->add_option("--bias", appendix_cfg.bias, "jump-law mean shift");

  // validate-model
  auto* validate = app.add_subcommand("validate-model",
                                      "model assumption checks");
  std::size_t validate_reps = 2000;
  validate->add_option("--model", model_name, "map model");
  validate->add_option("--bias", bias, "jump-law mean shift");
  validate->add_option("--reps", validate_reps, "Monte Carlo replicas");

  // replay
  auto* replay = app.add_subcommand("replay",
                                    "re-run a manifest and compare digests");
  std::string manifest_path;
  replay->add_option("manifest", manifest_path, "path to manifest.json")
      ->required();

  // global flags remain usable after the subcommand name
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);

    KeyValueConfig cfg = KeyValueConfig::parse_text("schema = 1\n");
    if (!config_path.empty()) cfg = KeyValueConfig::parse_file(config_path);

    if (sim_cbm->parsed()) {
      return cmd_simulate_cbm(starts, T, dt, no_bridge, seed, out_dir, format);
    }
    if (sim_crw->parsed()) {
      return cmd_simulate_crw(model_name, bias, starts, steps, gap_x0, seed,
                              out_dir, format);
    }
    if (rate->parsed()) {
      cfg.require_keys({"model", "bias", "n_grid", "ensemble", "grid_points",
                        "grid_D", "cbm_dt", "seed"});
      rate_cfg.model = cfg.get_string("model", rate_cfg.model);
      rate_cfg.bias = cfg.get_double("bias", rate_cfg.bias);
      if (cfg.has("n_grid")) {
        rate_cfg.n_grid.clear();
        for (double v : cfg.get_list("n_grid", {})) {
          rate_cfg.n_grid.push_back(static_cast<int>(v));
        }
      }
      rate_cfg.ensemble = static_cast<std::size_t>(
          cfg.get_int("ensemble", static_cast<std::int64_t>(rate_cfg.ensemble)));
      rate_cfg.grid_points =
          static_cast<int>(cfg.get_int("grid_points", rate_cfg.grid_points));
      rate_cfg.grid_D = cfg.get_double("grid_D", rate_cfg.grid_D);
      rate_cfg.cbm_dt = cfg.get_double("cbm_dt", rate_cfg.cbm_dt);
      rate_cfg.seed = cfg.get_u64("seed", seed);
      rate_cfg.threads = threads;
      rate_cfg.out_dir = out_dir;
      const auto result = run_rate_experiment(rate_cfg);
      for (const auto& w : result.warnings) {
        std::cerr << "warning: " << w << "\n";
      }
      for (const auto& [name, fit] : result.fits) {
        std::printf("%-18s K-hat %.3f  CI [%.3f, %.3f]  r2 %.3f\n",
                    name.c_str(), fit.exponent, fit.ci_lo, fit.ci_hi, fit.r2);
      }
      return 0;
    }
    if (renorm_cmd->parsed()) {
      cfg.require_keys({"model", "bias", "generations", "ensemble",
                        "grid_points", "grid_half", "reference_size",
                        "direct_size", "cbm_dt", "seed"});
      renorm_cfg.model = cfg.get_string("model", renorm_cfg.model);
      renorm_cfg.bias = cfg.get_double("bias", renorm_cfg.bias);
      renorm_cfg.generations = static_cast<int>(
          cfg.get_int("generations", renorm_cfg.generations));
      renorm_cfg.ensemble = static_cast<std::size_t>(cfg.get_int(
          "ensemble", static_cast<std::int64_t>(renorm_cfg.ensemble)));
      renorm_cfg.grid_points = static_cast<int>(
          cfg.get_int("grid_points", renorm_cfg.grid_points));
      renorm_cfg.grid_half = cfg.get_double("grid_half", renorm_cfg.grid_half);
      renorm_cfg.reference_size = static_cast<std::size_t>(cfg.get_int(
          "reference_size", static_cast<std::int64_t>(renorm_cfg.reference_size)));
      renorm_cfg.direct_size = static_cast<std::size_t>(cfg.get_int(
          "direct_size", static_cast<std::int64_t>(renorm_cfg.direct_size)));
      renorm_cfg.cbm_dt = cfg.get_double("cbm_dt", renorm_cfg.cbm_dt);
      renorm_cfg.seed = cfg.get_u64("seed", seed);
      renorm_cfg.threads = threads;
      renorm_cfg.out_dir = out_dir;
      const auto result = run_renorm_experiment(renorm_cfg);
      for (const auto& [name, fit] : result.fits) {
        std::printf("%-18s contraction/generation %.3f  (K-hat %.3f)\n",
                    name.c_str(), std::pow(2.0, -fit.exponent), fit.exponent);
      }
      return 0;
    }
    if (appendix->parsed()) {
      cfg.require_keys({"model", "bias", "reflection_reps", "gap_tail_reps",
                        "displacement_reps", "three_particle_reps",
                        "drift_reps_per_bin", "assumption_reps", "hitting_dt",
                        "seed"});
      appendix_cfg.model = cfg.get_string("model", appendix_cfg.model);
      appendix_cfg.bias = cfg.get_double("bias", appendix_cfg.bias);
      appendix_cfg.reflection_reps = static_cast<std::size_t>(cfg.get_int(
          "reflection_reps", static_cast<std::int64_t>(appendix_cfg.reflection_reps)));
      appendix_cfg.gap_tail_reps = static_cast<std::size_t>(cfg.get_int(
          "gap_tail_reps", static_cast<std::int64_t>(appendix_cfg.gap_tail_reps)));
      appendix_cfg.displacement_reps = static_cast<std::size_t>(cfg.get_int(
          "displacement_reps",
          static_cast<std::int64_t>(appendix_cfg.displacement_reps)));
      appendix_cfg.three_particle_reps = static_cast<std::size_t>(cfg.get_int(
          "three_particle_reps",
          static_cast<std::int64_t>(appendix_cfg.three_particle_reps)));
      appendix_cfg.drift_reps_per_bin = static_cast<std::size_t>(cfg.get_int(
          "drift_reps_per_bin",
          static_cast<std::int64_t>(appendix_cfg.drift_reps_per_bin)));
      appendix_cfg.assumption_reps = static_cast<std::size_t>(cfg.get_int(
          "assumption_reps",
          static_cast<std::int64_t>(appendix_cfg.assumption_reps)));
      appendix_cfg.hitting_dt = cfg.get_double("hitting_dt", appendix_cfg.hitting_dt);
      appendix_cfg.seed = cfg.get_u64("seed", seed);
      appendix_cfg.threads = threads;
      appendix_cfg.out_dir = out_dir;
      const auto result = run_appendix_suite(appendix_cfg);
      for (const auto& item : result.assumptions.items) {
        std::printf("%-28s %s  %s\n", item.name.c_str(),
                    item.passed ? "pass" : "FAIL", item.detail.c_str());
      }
      for (const auto& r : result.reports) {
        std::printf("%-28s %s  %s\n", r.name.c_str(),
                    r.passed ? "pass" : "FAIL", r.detail.c_str());
      }
      return result.all_passed ? 0 : 1;
    }
    if (validate->parsed()) {
      return cmd_validate_model(model_name, bias, validate_reps, seed, out_dir);
    }
    if (replay->parsed()) {
      const auto mismatched = replay_manifest(manifest_path, out_dir);
      if (mismatched.empty()) {
        std::cout << "replay ok: all digests match\n";
        return 0;
      }
      for (const auto& f : mismatched) {
        std::cerr << "digest mismatch: " << f << "\n";
      }
      return 1;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
