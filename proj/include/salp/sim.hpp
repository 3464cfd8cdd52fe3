#pragma once

#include <string>
#include <vector>

#include "salp/chain.hpp"
#include "salp/gait.hpp"
#include "salp/noise.hpp"

namespace salp {

/// Body-frame configuration increment: pose' = pose * Pose(d.head(3)),
/// joints added directly.
Config config_boxplus(const Config& c, const Vec5& d, double joint_limit);

/// Inverse of config_boxplus: the increment taking `reference` to `c`,
/// pose part expressed in the reference pose's body frame.
Vec5 config_boxminus(const Config& c, const Config& reference);

/// One step of the nominal quasi-static model qdot = A(r) u, integrated
/// with a 4th-order Runge-Kutta scheme in which the pose advances through
/// the SE(2) exponential each substep. Substeps are sized so dt_sub <= 5 ms
/// (override only for coarse search passes).
Config step_truth(const ChainParams& params, const Config& config,
                  const Control& u, double dt, double max_substep = 0.005);

/// Time-indexed run: ground truth, controls, and noisy gyro readings.
struct Trajectory {
  std::vector<double> timestamps;
  std::vector<Config> truth;
  std::vector<Control> controls;
  std::vector<Vec3> gyro;
  double rate_hz = 5.0;
  std::string gait_label;
  uint64_t seed = 0;

  size_t size() const { return timestamps.size(); }
  void validate() const;
};

/// Simulates `duration` seconds of the given gait at `rate` Hz from zero
/// shape and identity pose. Process noise perturbs the stored truth as
/// body-frame increments each sample (the logged truth plays the role of
/// the physical motion that deviates from the nominal model); measurement
/// noise is added to the predicted gyro readings. Deterministic per seed.
Trajectory simulate(const ChainParams& params, const GaitProgram& gait,
                    double duration, double rate, const NoiseModel& noise,
                    uint64_t seed);

enum class ResidualKind { process, measurement };

/// Residual samples: reduced inputs (alpha1, alpha2, u1, u2, u3) and the
/// ground-truth-minus-model targets.
struct ResidualDataset {
  std::vector<Vec5> inputs;
  std::vector<Eigen::VectorXd> targets;  // 5 (process) or 3 (measurement)
  double rate_hz = 5.0;
  ResidualKind kind = ResidualKind::process;

  size_t size() const { return inputs.size(); }
};

/// Downsamples the trajectory to `rate` and builds the process and
/// measurement residual datasets. Process targets are body-frame
/// one-step-ahead residuals; measurement targets are gyro residuals.
std::pair<ResidualDataset, ResidualDataset> build_residual_datasets(
    const Trajectory& traj, const ChainParams& params, double rate);

}  // namespace salp
