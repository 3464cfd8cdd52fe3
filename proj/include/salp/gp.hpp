#pragma once

#include <string>
#include <vector>

#include "salp/types.hpp"

namespace salp {

/// Squared-exponential ARD hyperparameters, stored as logs.
struct GpHyper {
  double log_signal_variance = 0.0;
  Eigen::VectorXd log_length_scales;  // one per input dimension
  double log_noise_variance = std::log(1e-2);

  double signal_variance() const { return std::exp(log_signal_variance); }
  double noise_variance() const { return std::exp(log_noise_variance); }
};

struct FitOptions {
  int opt_iterations = 30;
  int n_starts = 5;
  /// Marginal-likelihood optimization runs on a deterministic subset of
  /// this many points when n exceeds it; the returned model always
  /// conditions on the full dataset.
  int hyperopt_subset = 512;
};

/// One scalar-output Gaussian process: training data, hyperparameters,
/// normalizers, and the cached factorization of K + sigma_n^2 I.
class GpModel {
 public:
  GpModel() = default;

  /// Builds the model from raw data and hyperparameters (normalizers
  /// computed here, factorization cached). Used by fit() and by artifact
  /// loading.
  GpModel(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
          const GpHyper& hyper);

  /// Posterior mean and variance at a query point (raw units). Variance
  /// includes the noise floor.
  std::pair<double, double> predict(const Eigen::VectorXd& query) const;

  int input_dim() const { return static_cast<int>(inputs_.cols()); }
  int n_points() const { return static_cast<int>(inputs_.rows()); }

  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::VectorXd& targets() const { return targets_; }
  const GpHyper& hyper() const { return hyper_; }
  const Eigen::VectorXd& input_mean() const { return x_mean_; }
  const Eigen::VectorXd& input_std() const { return x_std_; }
  double target_mean() const { return y_mean_; }
  double target_std() const { return y_std_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::vector<std::string>& warnings() { return warnings_; }

 private:
  Eigen::MatrixXd inputs_;   // raw
  Eigen::VectorXd targets_;  // raw
  GpHyper hyper_;
  Eigen::VectorXd x_mean_, x_std_;
  double y_mean_ = 0.0, y_std_ = 1.0;

  Eigen::MatrixXd xn_;      // normalized inputs
  Eigen::MatrixXd chol_l_;  // lower factor of K + sigma_n^2 I (+ jitter)
  Eigen::VectorXd weights_;
  double jitter_ = 0.0;
  std::vector<std::string> warnings_;
};

/// Log marginal likelihood and its gradient w.r.t. (log sf2, log ls...,
/// log sn2) on pre-normalized data. Exposed for testing.
double log_marginal_likelihood(const Eigen::MatrixXd& xn,
                               const Eigen::VectorXd& yn, const GpHyper& hyper,
                               Eigen::VectorXd* grad = nullptr);

/// Fits one scalar-output GP: normalizes, then maximizes the marginal
/// likelihood by multi-start gradient ascent with backtracking line
/// search. Deterministic given the seed.
GpModel fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
            const FitOptions& options, uint64_t seed);

/// Stacks per-output predictions; the returned covariance is the diagonal
/// variance vector.
std::pair<Eigen::VectorXd, Eigen::VectorXd> batch_diagonal_predict(
    const std::vector<GpModel>& models, const Eigen::VectorXd& query);

}  // namespace salp
