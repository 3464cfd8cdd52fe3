#pragma once

#include <map>
#include <optional>
#include <string>

#include "salp/chain.hpp"
#include "salp/gait.hpp"
#include "salp/gp.hpp"
#include "salp/io.hpp"
#include "salp/metrics.hpp"
#include "salp/noise.hpp"
#include "salp/ukf.hpp"

namespace salp {

/// End-to-end run configuration (Tables of the experimental protocol are
/// encoded in the checked-in scenario configs).
struct RunConfig {
  ChainParams params = ChainParams::default_params();
  NoiseModel noise = NoiseModel::default_model();
  std::map<std::string, GaitProgram> gaits = gait_library();

  uint64_t seed = 1;
  double sim_rate_hz = 5.0;
  double dataset_rate_hz = 5.0;
  double forward_train_duration_s = 450.0;
  double per_gait_train_duration_s = 90.0;
  double test_duration_s = 80.0;

  FitOptions gp;
  UtParams ut;
  double init_sigma_position_m = 0.01;
  double init_sigma_heading_rad = 5.0 * M_PI / 180.0;
  double init_sigma_joint_rad = 5.0 * M_PI / 180.0;

  std::string out_dir = "out";

  void validate() const;
};

/// Parses a run-config JSON file; relative paths inside resolve against
/// the config file's directory.
RunConfig load_run_config(const std::string& path);

struct ScenarioResult {
  /// Per-test-gait evaluation reports.
  std::map<std::string, EvalReport> reports;
  /// Per-test-gait filter runs (kept for downstream checks).
  std::map<std::string, RunResult> runs;
  /// Scenario-level acceptance checks: one line each, prefixed ok/FAIL.
  std::vector<std::string> check_lines;
  bool checks_passed = true;
  std::string gp_artifact_path;
};

/// Named scenarios: "forward-only", "multi-gait", "left-generalization".
/// Executes simulate -> datasets -> GP fit -> filter -> evaluate and writes
/// every artifact under cfg.out_dir/<scenario>/.
ScenarioResult run_scenario(const std::string& scenario, const RunConfig& cfg);

// --- individual pipeline stages (the CLI verbs wrap these) ---

/// Simulates one labeled gait run and writes CSV + sidecar. Returns the
/// trajectory path.
std::string stage_simulate(const RunConfig& cfg, const std::string& gait_name,
                           double duration, const std::string& out_dir,
                           const std::string& tag);

/// Builds datasets from trajectories and fits the 5 + 3 residual GPs.
EnhancedGpModels train_gp_models(const std::vector<Trajectory>& trajs,
                                 const RunConfig& cfg,
                                 std::string* dataset_hash = nullptr);

FilterState initial_state(const RunConfig& cfg, const Config& truth0);

/// Gait calibration: searches first-order Fourier coefficients realizing
/// the requested per-cycle displacement with a closed shape loop.
enum class GaitAxis { x, y, theta };
GaitProgram calibrate_gait(const ChainParams& params, GaitAxis axis,
                           double per_cycle_target, double period,
                           uint64_t seed);

/// Calibrates the full five-gait library (mirrors included).
std::map<std::string, GaitProgram> calibrate_library(const ChainParams& params,
                                                     uint64_t seed);

/// Net per-cycle displacement of a gait in noise-free simulation, measured
/// over the cycle starting at `cycle_index` from zero shape.
Vec3 per_cycle_displacement(const ChainParams& params, const GaitProgram& gait,
                            double rate_hz, int cycle_index);

}  // namespace salp
