#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "salp/chain.hpp"
#include "salp/gp.hpp"
#include "salp/sim.hpp"
#include "salp/types.hpp"

namespace salp {

/// Scaled unscented-transform parameters.
struct UtParams {
  double alpha_ut = 1.0;
  double beta_ut = 2.0;
  double kappa_ut = 0.0;

  double lambda(int n) const {
    return alpha_ut * alpha_ut * (n + kappa_ut) - n;
  }
  void validate(int n) const;
};

struct SigmaSet {
  Eigen::MatrixXd points;  // n x (2n+1), column 0 is the mean
  Eigen::VectorXd wm, wc;
};

/// 2n+1 sigma points from scaled Cholesky columns (eigenvalue square root
/// when the covariance is semidefinite). Angle dimensions are wrapped.
SigmaSet sigma_points(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                      const UtParams& ut, const std::vector<int>& angle_dims = {});

struct UtStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Weighted recombination; angle dimensions use the circular mean and
/// wrapped deviations.
UtStats ut_recombine(const Eigen::MatrixXd& points, const Eigen::VectorXd& wm,
                     const Eigen::VectorXd& wc, const std::vector<int>& angle_dims = {});

/// Generic unscented predict/update over plain vectors; the chain filter
/// and the linear-system reference tests both drive this core.
namespace ukf_core {

using TransitionFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

UtStats predict(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                const TransitionFn& process, const Eigen::MatrixXd& q,
                const UtParams& ut, const std::vector<int>& angle_dims = {});

UtStats update(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
               const TransitionFn& measurement, const Eigen::MatrixXd& r,
               const Eigen::VectorXd& y, const UtParams& ut,
               const std::vector<int>& angle_dims = {});

}  // namespace ukf_core

/// Filter state over (x, y, theta, alpha1, alpha2).
struct FilterState {
  Vec5 mean = Vec5::Zero();
  Mat5 covariance = Mat5::Zero();
};

/// Residual learners: one GP per process output (body-frame increments)
/// and per gyro channel, all over (alpha1, alpha2, u1, u2, u3).
struct EnhancedGpModels {
  std::vector<GpModel> process;      // 5 models
  std::vector<GpModel> measurement;  // 3 models
  std::string residual_frame = "body";

  void validate() const;
};

struct FilterConfig {
  UtParams ut;
  const EnhancedGpModels* gp = nullptr;  // null: fixed_q / fixed_r below
  Mat5 fixed_q = Mat5::Zero();
  Mat3 fixed_r = Mat3::Identity() * 1e-4;
};

/// Unscented predict through the nominal model plus the GP process
/// residual mean; Q from the GP variances at the prior mean's (shape, u),
/// pose block rotated into world axes at the predicted heading.
FilterState predict(const FilterState& state, const Control& u, double dt,
                    const ChainParams& params, const FilterConfig& cfg,
                    int* shape_clamps = nullptr);

/// Unscented gyro update with the GP measurement residual mean and
/// GP-derived R.
FilterState update(const FilterState& state, const Vec3& y, const Control& u,
                   const ChainParams& params, const FilterConfig& cfg,
                   int* shape_clamps = nullptr);

struct RunResult {
  std::vector<double> t;
  std::vector<Vec5> mean;
  std::vector<Mat5> covariance;
  std::vector<Vec5> error;            // empty when no truth available
  std::vector<double> prior_pos_trace;  // position-block trace before update
  int shape_clamps = 0;
  double runtime_seconds = 0.0;
};

/// Alternating predict/update over the measurement stream of `traj` at its
/// own rate. Truth, when present in the trajectory, is used only to emit
/// the error series.
RunResult run(const Trajectory& traj, const FilterState& init,
              const ChainParams& params, const FilterConfig& cfg,
              bool use_truth = true);

}  // namespace salp
