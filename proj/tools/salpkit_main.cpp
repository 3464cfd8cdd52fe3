#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "salp/identify.hpp"
#include "salp/pipeline.hpp"

namespace fs = std::filesystem;
using namespace salp;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerics: return 4;
    case ErrorKind::io: return 5;
  }
  return 1;
}

std::string default_config_dir() {
  if (const char* env = std::getenv("SALPKIT_CONFIG_DIR")) return env;
  return "configs";
}

RunConfig load_config_or_default(const std::string& config_path,
                                 std::optional<uint64_t> seed,
                                 std::optional<std::string> out_dir,
                                 std::optional<double> rate) {
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = load_run_config(config_path);
  } else {
    const fs::path dir = default_config_dir();
    const fs::path candidate = dir / "run_default.json";
    if (fs::exists(candidate)) cfg = load_run_config(candidate.string());
  }
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.out_dir = *out_dir;
  if (rate) {
    cfg.sim_rate_hz = *rate;
    cfg.dataset_rate_hz = std::min(cfg.dataset_rate_hz, *rate);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chain-robot simulation, residual learning, and filtering toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<double> rate;
  app.add_option("--config", config_path, "Run-config JSON path");
  app.add_option("--seed", seed, "Root seed (overrides config)");
  app.add_option("--out", out_dir, "Output directory (overrides config)");
  app.add_option("--rate", rate, "Simulation rate in Hz (overrides config)");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a gait trajectory");
  std::string sim_gait = "forward";
  double sim_duration = 450.0;
  sim_cmd->add_option("--gait", sim_gait, "Gait name (or 'all')");
  sim_cmd->add_option("--duration", sim_duration, "Run length in seconds");

  // train
  auto* train_cmd = app.add_subcommand("train", "Fit residual GPs from trajectories");
  std::vector<std::string> train_trajs;
  std::string train_out = "gp_models.json";
  train_cmd->add_option("--trajectory", train_trajs, "Trajectory CSV paths")
      ->required();
  train_cmd->add_option("--artifact", train_out, "Output GP artifact path");

  // filter
  auto* filter_cmd = app.add_subcommand("filter", "Run the filter on a trajectory");
  std::string filter_traj, filter_gp;
  filter_cmd->add_option("--trajectory", filter_traj, "Test trajectory CSV")->required();
  filter_cmd->add_option("--artifact", filter_gp, "GP artifact path")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Compare two report files");
  std::string eval_a, eval_b;
  eval_cmd->add_option("report_a", eval_a)->required();
  eval_cmd->add_option("report_b", eval_b)->required();

  // repro
  auto* repro_cmd = app.add_subcommand("repro", "Run a full named scenario");
  std::string scenario = "forward-only";
  repro_cmd->add_option("--scenario", scenario,
                        "forward-only | multi-gait | left-generalization");

  // gait-cal
  auto* cal_cmd = app.add_subcommand("gait-cal", "Recalibrate the gait library");
  std::string cal_out = "gaits_calibrated.json";
  cal_cmd->add_option("--output", cal_out, "Calibrated gait JSON path");

  // identify
  auto* id_cmd = app.add_subcommand("identify", "Identify drag parameters");
  std::vector<std::string> id_trajs;
  std::string id_out = "chain_identified.json";
  id_cmd->add_option("--trajectory", id_trajs, "Trajectory CSV paths")->required();
  id_cmd->add_option("--output", id_out, "Identified chain-params JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_config_or_default(config_path, seed, out_dir, rate);

    if (sim_cmd->parsed()) {
      std::vector<std::string> names;
      if (sim_gait == "all")
        for (const auto& [n, g] : cfg.gaits) names.push_back(n);
      else
        names.push_back(sim_gait);
      for (const auto& n : names) {
        const std::string path =
            stage_simulate(cfg, n, sim_duration, cfg.out_dir, "sim_" + n);
        std::cout << "wrote " << path << "\n";
      }
    } else if (train_cmd->parsed()) {
      std::vector<Trajectory> trajs;
      for (const auto& p : train_trajs) trajs.push_back(load_trajectory(p));
      std::string ds_hash;
      const EnhancedGpModels models = train_gp_models(trajs, cfg, &ds_hash);
      const std::string path = (fs::path(cfg.out_dir) / train_out).string();
      save_gp_set(models, path, ds_hash);
      std::cout << "wrote " << path << " (dataset hash " << ds_hash << ")\n";
    } else if (filter_cmd->parsed()) {
      const Trajectory traj = load_trajectory(filter_traj);
      std::string gp_params_hash;
      const EnhancedGpModels gp = load_gp_set(filter_gp, nullptr, &gp_params_hash);

      // provenance check: artifact vs trajectory chain parameters
      const std::string traj_meta = filter_traj + ".meta.json";
      if (!gp_params_hash.empty() && fs::exists(traj_meta)) {
        const auto meta = nlohmann::json::parse(read_text_file(traj_meta));
        const std::string traj_params = meta.value("params_hash", "");
        if (!traj_params.empty() && traj_params != gp_params_hash)
          std::cerr << "warning: GP artifact and trajectory were produced with "
                       "different chain parameters ("
                    << gp_params_hash << " vs " << traj_params << ")\n";
      }

      FilterConfig fc;
      fc.ut = cfg.ut;
      fc.gp = &gp;
      const FilterState init = initial_state(cfg, traj.truth[0]);
      const RunResult res = run(traj, init, cfg.params, fc);
      EvalReport rep = evaluate_errors(res.t, res.error, res.covariance);
      rep.runtime_seconds = res.runtime_seconds;
      rep.test_hash = hash_file(filter_traj);

      EstimateMeta emeta;
      emeta.gp_artifact_hash = hash_file(filter_gp);
      emeta.trajectory_hash = rep.test_hash;
      emeta.init_mean = init.mean;
      emeta.init_sigma = init.covariance.diagonal().cwiseSqrt();
      emeta.ut = cfg.ut;
      save_estimates(res, (fs::path(cfg.out_dir) / "estimates.csv").string(),
                     &emeta);
      save_report(rep, (fs::path(cfg.out_dir) / "report.json").string());
      emit_plots(res.t, res.error, res.covariance,
                 (fs::path(cfg.out_dir) / "plots").string());
      std::cout << "filter run complete, NEES mean " << rep.nees_mean
                << ", runtime " << res.runtime_seconds << " s\n";
    } else if (eval_cmd->parsed()) {
      const FilterComparison cmp =
          compare_filters(load_report(eval_a), load_report(eval_b));
      std::cout << cmp.to_text();
    } else if (repro_cmd->parsed()) {
      const ScenarioResult res = run_scenario(scenario, cfg);
      for (const auto& line : res.check_lines) std::cout << line << "\n";
      std::cout << (res.checks_passed ? "scenario checks passed"
                                      : "scenario checks FAILED")
                << "\n";
      return res.checks_passed ? 0 : 1;
    } else if (cal_cmd->parsed()) {
      const auto lib = calibrate_library(cfg.params, cfg.seed);
      const std::string path = (fs::path(cfg.out_dir) / cal_out).string();
      write_text_file(path, gaits_to_json(lib));
      for (const auto& [name, g] : lib) {
        const Vec3 d = per_cycle_displacement(cfg.params, g, 5.0, 0);
        std::cout << name << ": per-cycle (" << d.transpose() << "), peak |u| "
                  << std::max({g.peak_component(0), g.peak_component(1),
                               g.peak_component(2)})
                  << ", peak ||u|| " << g.peak_norm() << "\n";
      }
      std::cout << "wrote " << path << "\n";
    } else if (id_cmd->parsed()) {
      std::vector<Trajectory> trajs;
      for (const auto& p : id_trajs) trajs.push_back(load_trajectory(p));
      IdentifyOptions opts;
      opts.seed = cfg.seed;
      const IdentifyResult res = identify_drag(trajs, cfg.params, opts);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      const std::string path = (fs::path(cfg.out_dir) / id_out).string();
      save_chain_params(res.params, path);
      std::cout << "wrote " << path << " (objective " << res.objective
                << ", regressor condition " << res.regressor_condition << ")\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
