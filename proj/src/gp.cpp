#include "salp/gp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "salp/rng.hpp"

namespace salp {

namespace {

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& xn, const GpHyper& h) {
  const auto n = xn.rows();
  const auto d = xn.cols();
  const double sf2 = h.signal_variance();
  Eigen::VectorXd inv_ls2(d);
  for (Eigen::Index k = 0; k < d; ++k)
    inv_ls2[k] = std::exp(-2.0 * h.log_length_scales[k]);

  Eigen::MatrixXd km(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    km(i, i) = sf2;
    for (Eigen::Index j = 0; j < i; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double dk = xn(i, k) - xn(j, k);
        s += dk * dk * inv_ls2[k];
      }
      const double v = sf2 * std::exp(-0.5 * s);
      km(i, j) = v;
      km(j, i) = v;
    }
  }
  return km;
}

// Cholesky with escalating jitter relative to the mean diagonal; throws
// once the ladder is exhausted.
Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(const Eigen::MatrixXd& ky,
                                             double* jitter_out) {
  const double mean_diag = ky.diagonal().mean();
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(
        jitter == 0.0
            ? ky
            : Eigen::MatrixXd(ky + jitter * Eigen::MatrixXd::Identity(ky.rows(), ky.cols())));
    if (llt.info() == Eigen::Success) {
      if (jitter_out) *jitter_out = jitter;
      return llt;
    }
    jitter = (jitter == 0.0) ? 1e-10 * mean_diag : jitter * 100.0;
    if (jitter > 1e-6 * mean_diag * 1.0000001) break;
  }
  throw NumericsError("kernel matrix not positive definite within jitter ladder");
}

// Permutation-invariant subset: rank rows by a hash of their raw bytes so
// shuffled data selects the same points.
std::vector<Eigen::Index> hash_subset(const Eigen::MatrixXd& x,
                                      const Eigen::VectorXd& y, int m) {
  const auto n = x.rows();
  std::vector<std::pair<uint64_t, Eigen::Index>> keys;
  keys.reserve(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](double v) {
      uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 0x100000001b3ull;
      }
    };
    for (Eigen::Index k = 0; k < x.cols(); ++k) mix(x(i, k));
    mix(y[i]);
    keys.emplace_back(h, i);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) idx.push_back(keys[static_cast<size_t>(i)].second);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double log_marginal_likelihood(const Eigen::MatrixXd& xn,
                               const Eigen::VectorXd& yn, const GpHyper& hyper,
                               Eigen::VectorXd* grad) {
  const auto n = xn.rows();
  const auto d = xn.cols();
  const double sn2 = hyper.noise_variance();

  Eigen::MatrixXd km = kernel_matrix(xn, hyper);
  Eigen::MatrixXd ky = km + sn2 * Eigen::MatrixXd::Identity(n, n);
  double jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt = chol_with_jitter(ky, &jitter);

  const Eigen::VectorXd alpha = llt.solve(yn);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(llt.matrixLLT()(i, i));
  const double lml = -0.5 * yn.dot(alpha) - log_det -
                     0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  if (!std::isfinite(lml)) throw NumericsError("non-finite marginal likelihood");
  if (!grad) return lml;

  // S = alpha alpha^T - Ky^{-1}; grad_j = 0.5 sum S .* dK/dtheta_j.
  Eigen::MatrixXd s = -llt.solve(Eigen::MatrixXd::Identity(n, n));
  s.noalias() += alpha * alpha.transpose();

  grad->resize(d + 2);
  Eigen::VectorXd inv_ls2(d);
  for (Eigen::Index k = 0; k < d; ++k)
    inv_ls2[k] = std::exp(-2.0 * hyper.log_length_scales[k]);

  double g_sf2 = 0.0;
  Eigen::VectorXd g_ls = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    g_sf2 += 0.5 * s(i, i) * km(i, i);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double sk = s(i, j) * km(i, j);
      g_sf2 += sk;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double dk = xn(i, k) - xn(j, k);
        g_ls[k] += sk * dk * dk * inv_ls2[k];
      }
    }
  }
  (*grad)[0] = g_sf2;
  grad->segment(1, d) = g_ls;
  (*grad)[d + 1] = 0.5 * sn2 * s.trace();
  return lml;
}

GpModel::GpModel(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                 const GpHyper& hyper)
    : inputs_(inputs), targets_(targets), hyper_(hyper) {
  const auto n = inputs.rows();
  const auto d = inputs.cols();
  if (n < 1 || targets.size() != n) throw DataError("GP data size mismatch");
  if (hyper.log_length_scales.size() != d)
    throw DataError("hyperparameter dimension mismatch");
  if (!inputs.allFinite() || !targets.allFinite())
    throw DataError("GP data must be finite");

  x_mean_ = inputs.colwise().mean();
  x_std_.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double var =
        (inputs.col(k).array() - x_mean_[k]).square().sum() / static_cast<double>(n);
    x_std_[k] = std::sqrt(var);
    if (x_std_[k] < 1e-12) x_std_[k] = 1.0;
  }
  y_mean_ = targets.mean();
  const double y_var =
      (targets.array() - y_mean_).square().sum() / static_cast<double>(n);
  y_std_ = std::sqrt(y_var);
  if (y_std_ < 1e-12) y_std_ = 1.0;

  xn_ = (inputs.rowwise() - x_mean_.transpose()).array().rowwise() /
        x_std_.transpose().array();
  const Eigen::VectorXd yn = (targets.array() - y_mean_) / y_std_;

  Eigen::MatrixXd ky =
      kernel_matrix(xn_, hyper_) +
      hyper_.noise_variance() * Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt = chol_with_jitter(ky, &jitter_);
  chol_l_ = llt.matrixL();
  weights_ = llt.solve(yn);
}

std::pair<double, double> GpModel::predict(const Eigen::VectorXd& query) const {
  if (query.size() != inputs_.cols()) throw DataError("query dimension mismatch");
  if (!query.allFinite()) throw DataError("query must be finite");
  const auto n = xn_.rows();
  const auto d = xn_.cols();
  const double sf2 = hyper_.signal_variance();

  Eigen::VectorXd qn =
      (query - x_mean_).array() / x_std_.array();
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      const double dk = qn[k] - xn_(i, k);
      s += dk * dk * std::exp(-2.0 * hyper_.log_length_scales[k]);
    }
    kstar[i] = sf2 * std::exp(-0.5 * s);
  }

  const double mean_n = kstar.dot(weights_);
  const Eigen::VectorXd v =
      chol_l_.triangularView<Eigen::Lower>().solve(kstar);
  double var_n = sf2 - v.squaredNorm() + hyper_.noise_variance();
  const double floor = hyper_.noise_variance() * (1.0 - 1e-9);
  if (var_n < floor) var_n = floor;

  return {y_mean_ + y_std_ * mean_n, y_std_ * y_std_ * var_n};
}

GpModel fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
            const FitOptions& options, uint64_t seed) {
  const auto n = inputs.rows();
  const auto d = inputs.cols();
  if (n < 2) throw DataError("GP fit needs at least 2 samples");
  if (d < 1) throw DataError("GP fit needs at least 1 input dimension");
  if (targets.size() != n) throw DataError("GP data size mismatch");
  if (!inputs.allFinite() || !targets.allFinite())
    throw DataError("GP data must be finite");

  std::vector<std::string> warnings;

  // Normalization statistics over the full dataset.
  Eigen::VectorXd x_mean = inputs.colwise().mean();
  Eigen::VectorXd x_std(d);
  std::vector<bool> frozen_ls(static_cast<size_t>(d), false);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double var =
        (inputs.col(k).array() - x_mean[k]).square().sum() / static_cast<double>(n);
    x_std[k] = std::sqrt(var);
    if (x_std[k] < 1e-12) {
      x_std[k] = 1.0;
      frozen_ls[static_cast<size_t>(k)] = true;
      std::ostringstream os;
      os << "input column " << k << " has zero variance; length scale fixed";
      warnings.push_back(os.str());
    }
  }
  const double y_mean = targets.mean();
  double y_std = std::sqrt((targets.array() - y_mean).square().sum() /
                           static_cast<double>(n));
  if (y_std < 1e-12) y_std = 1.0;

  // Optimization data, possibly a hash-selected subset.
  Eigen::MatrixXd x_opt = inputs;
  Eigen::VectorXd y_opt = targets;
  if (options.hyperopt_subset > 0 && n > options.hyperopt_subset) {
    const auto idx = hash_subset(inputs, targets, options.hyperopt_subset);
    x_opt.resize(options.hyperopt_subset, d);
    y_opt.resize(options.hyperopt_subset);
    for (size_t i = 0; i < idx.size(); ++i) {
      x_opt.row(static_cast<Eigen::Index>(i)) = inputs.row(idx[i]);
      y_opt[static_cast<Eigen::Index>(i)] = targets[idx[i]];
    }
  }
  Eigen::MatrixXd xn =
      (x_opt.rowwise() - x_mean.transpose()).array().rowwise() /
      x_std.transpose().array();
  Eigen::VectorXd yn = (y_opt.array() - y_mean) / y_std;

  auto masked = [&](Eigen::VectorXd g) {
    for (Eigen::Index k = 0; k < d; ++k)
      if (frozen_ls[static_cast<size_t>(k)]) g[1 + k] = 0.0;
    return g;
  };

  Rng rng(seed);
  GpHyper best_hyper;
  double best_lml = -std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (int start = 0; start < options.n_starts; ++start) {
    GpHyper h;
    h.log_length_scales = Eigen::VectorXd::Zero(d);
    h.log_signal_variance = 0.0;
    h.log_noise_variance = std::log(1e-2);
    if (start > 0) {
      for (Eigen::Index k = 0; k < d; ++k)
        h.log_length_scales[k] = rng.uniform(-1.0, 1.5);
      h.log_signal_variance = rng.uniform(-2.0, 1.0);
      h.log_noise_variance = rng.uniform(-7.0, -1.0);
      for (Eigen::Index k = 0; k < d; ++k)
        if (frozen_ls[static_cast<size_t>(k)]) h.log_length_scales[k] = 0.0;
    }

    Eigen::VectorXd grad;
    double lml;
    try {
      lml = log_marginal_likelihood(xn, yn, h, &grad);
    } catch (const NumericsError&) {
      continue;  // pathological start, skip it
    }
    grad = masked(grad);

    double step = 0.1;
    for (int it = 0; it < options.opt_iterations; ++it) {
      if (grad.norm() < 1e-7) break;
      bool accepted = false;
      for (int bt = 0; bt < 8; ++bt) {
        GpHyper trial = h;
        trial.log_signal_variance += step * grad[0];
        trial.log_length_scales += step * grad.segment(1, d);
        trial.log_noise_variance += step * grad[d + 1];
        // Keep logs in a sane box to avoid overflow.
        trial.log_signal_variance = std::clamp(trial.log_signal_variance, -20.0, 10.0);
        trial.log_noise_variance = std::clamp(trial.log_noise_variance, -20.0, 10.0);
        for (Eigen::Index k = 0; k < d; ++k)
          trial.log_length_scales[k] = std::clamp(trial.log_length_scales[k], -8.0, 8.0);

        Eigen::VectorXd trial_grad;
        double trial_lml;
        try {
          trial_lml = log_marginal_likelihood(xn, yn, trial, &trial_grad);
        } catch (const NumericsError&) {
          step *= 0.5;
          continue;
        }
        if (trial_lml > lml) {
          h = trial;
          lml = trial_lml;
          grad = masked(trial_grad);
          if (bt == 0) step *= 1.3;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // no ascent direction at this scale
    }

    if (!have_best || lml > best_lml) {
      best_lml = lml;
      best_hyper = h;
      have_best = true;
    }
  }
  if (!have_best) throw NumericsError("all hyperparameter starts failed");

  GpModel model(inputs, targets, best_hyper);
  for (auto& w : warnings) model.warnings().push_back(std::move(w));
  return model;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> batch_diagonal_predict(
    const std::vector<GpModel>& models, const Eigen::VectorXd& query) {
  if (models.empty()) throw DataError("no GP models given");
  const int d = models.front().input_dim();
  for (const auto& m : models)
    if (m.input_dim() != d) throw DataError("GP input dimensions differ");

  const auto n_out = static_cast<Eigen::Index>(models.size());
  Eigen::VectorXd mean(n_out), var(n_out);
  for (Eigen::Index i = 0; i < n_out; ++i) {
    const auto [m, v] = models[static_cast<size_t>(i)].predict(query);
    mean[i] = m;
    var[i] = v;
  }
  return {mean, var};
}

}  // namespace salp
