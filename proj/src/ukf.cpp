#include "salp/ukf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>

namespace salp {

void UtParams::validate(int n) const {
  if (n + lambda(n) <= 0.0)
    throw ConfigError("unscented scaling requires n + lambda > 0");
}

namespace {

// Symmetrize and clamp eigenvalues at zero.
Eigen::MatrixXd make_psd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() >= 0.0) return sym;
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Matrix square root for sigma points: Cholesky, falling back to the
// eigenvalue root for semidefinite covariances.
Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw NumericsError("covariance square root failed");
  const double floor = -1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < floor)
    throw NumericsError("covariance has significantly negative eigenvalues");
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

SigmaSet sigma_points(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                      const UtParams& ut, const std::vector<int>& angle_dims) {
  const int n = static_cast<int>(mean.size());
  ut.validate(n);
  const double lambda = ut.lambda(n);
  const double scale = std::sqrt(n + lambda);

  const Eigen::MatrixXd root = matrix_sqrt(cov);

  SigmaSet s;
  s.points.resize(n, 2 * n + 1);
  s.points.col(0) = mean;
  for (int i = 0; i < n; ++i) {
    s.points.col(1 + i) = mean + scale * root.col(i);
    s.points.col(1 + n + i) = mean - scale * root.col(i);
  }
  for (int d : angle_dims)
    for (int j = 0; j < 2 * n + 1; ++j)
      s.points(d, j) = wrap_angle(s.points(d, j));

  s.wm.resize(2 * n + 1);
  s.wc.resize(2 * n + 1);
  s.wm.setConstant(1.0 / (2.0 * (n + lambda)));
  s.wc = s.wm;
  s.wm[0] = lambda / (n + lambda);
  s.wc[0] = s.wm[0] + (1.0 - ut.alpha_ut * ut.alpha_ut + ut.beta_ut);
  return s;
}

UtStats ut_recombine(const Eigen::MatrixXd& points, const Eigen::VectorXd& wm,
                     const Eigen::VectorXd& wc, const std::vector<int>& angle_dims) {
  const auto n = points.rows();
  const auto m = points.cols();

  Eigen::VectorXd mean = points * wm;
  for (int d : angle_dims) {
    double si = 0.0, co = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      si += wm[j] * std::sin(points(d, j));
      co += wm[j] * std::cos(points(d, j));
    }
    mean[d] = std::atan2(si, co);
  }

  Eigen::MatrixXd dev = points.colwise() - mean;
  for (int d : angle_dims)
    for (Eigen::Index j = 0; j < m; ++j) dev(d, j) = wrap_angle(dev(d, j));

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < m; ++j)
    cov.noalias() += wc[j] * dev.col(j) * dev.col(j).transpose();
  return {mean, cov};
}

namespace ukf_core {

UtStats predict(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                const TransitionFn& process, const Eigen::MatrixXd& q,
                const UtParams& ut, const std::vector<int>& angle_dims) {
  SigmaSet s = sigma_points(mean, cov, ut, angle_dims);
  Eigen::MatrixXd propagated(mean.size(), s.points.cols());
  for (Eigen::Index j = 0; j < s.points.cols(); ++j)
    propagated.col(j) = process(s.points.col(j));
  UtStats stats = ut_recombine(propagated, s.wm, s.wc, angle_dims);
  stats.cov += q;
  stats.cov = make_psd(stats.cov);
  return stats;
}

UtStats update(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
               const TransitionFn& measurement, const Eigen::MatrixXd& r,
               const Eigen::VectorXd& y, const UtParams& ut,
               const std::vector<int>& angle_dims) {
  SigmaSet s = sigma_points(mean, cov, ut, angle_dims);
  const auto n_sigma = s.points.cols();
  const auto n_meas = y.size();

  Eigen::MatrixXd zs(n_meas, n_sigma);
  for (Eigen::Index j = 0; j < n_sigma; ++j)
    zs.col(j) = measurement(s.points.col(j));

  const Eigen::VectorXd z_mean = zs * s.wm;
  Eigen::MatrixXd z_dev = zs.colwise() - z_mean;
  Eigen::MatrixXd x_dev = s.points.colwise() - mean;
  for (int d : angle_dims)
    for (Eigen::Index j = 0; j < n_sigma; ++j)
      x_dev(d, j) = wrap_angle(x_dev(d, j));

  Eigen::MatrixXd s_mat = r;
  Eigen::MatrixXd c_mat = Eigen::MatrixXd::Zero(mean.size(), n_meas);
  for (Eigen::Index j = 0; j < n_sigma; ++j) {
    s_mat.noalias() += s.wc[j] * z_dev.col(j) * z_dev.col(j).transpose();
    c_mat.noalias() += s.wc[j] * x_dev.col(j) * z_dev.col(j).transpose();
  }

  Eigen::LLT<Eigen::MatrixXd> llt(s_mat);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * std::max(1.0, s_mat.diagonal().maxCoeff());
    llt.compute(s_mat + jitter * Eigen::MatrixXd::Identity(n_meas, n_meas));
    if (llt.info() != Eigen::Success)
      throw NumericsError("innovation covariance singular");
  }
  const Eigen::MatrixXd gain = llt.solve(c_mat.transpose()).transpose();

  UtStats out;
  out.mean = mean + gain * (y - z_mean);
  for (int d : angle_dims) out.mean[d] = wrap_angle(out.mean[d]);
  out.cov = make_psd(cov - gain * s_mat * gain.transpose());
  return out;
}

}  // namespace ukf_core

void EnhancedGpModels::validate() const {
  if (process.size() != 5 || measurement.size() != 3)
    throw DataError("expected 5 process and 3 measurement GP models");
  for (const auto& m : process)
    if (m.input_dim() != 5) throw DataError("process GP input dim must be 5");
  for (const auto& m : measurement)
    if (m.input_dim() != 5) throw DataError("measurement GP input dim must be 5");
}

namespace {

const std::vector<int> kAngleDims = {2, 3, 4};

Vec5 gp_query(const Vec5& mean, const Vec3& u) {
  Vec5 q;
  q << mean[3], mean[4], u[0], u[1], u[2];
  return q;
}

// Clamp joint angles into the mechanical range, counting breaches.
Vec2 clamped_shape(double a1, double a2, double limit, int* clamps) {
  Vec2 r(a1, a2);
  for (int i = 0; i < 2; ++i) {
    if (std::abs(r[i]) > limit) {
      r[i] = std::clamp(r[i], -limit, limit);
      if (clamps) ++*clamps;
    }
  }
  return r;
}

}  // namespace

FilterState predict(const FilterState& state, const Control& u, double dt,
                    const ChainParams& params, const FilterConfig& cfg,
                    int* shape_clamps) {
  Vec5 residual_mean = Vec5::Zero();
  Vec5 residual_var = Vec5::Zero();
  if (cfg.gp) {
    const auto [m, v] = batch_diagonal_predict(cfg.gp->process,
                                               gp_query(state.mean, u.u));
    residual_mean = m;
    residual_var = v;
  }

  auto process = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Vec2 r = clamped_shape(x[3], x[4], params.joint_limit, shape_clamps);
    Config c{Pose(x[0], x[1], x[2]), Shape(r[0], r[1], params.joint_limit)};
    Config next = step_truth(params, c, u, dt);
    next = config_boxplus(next, residual_mean, M_PI);  // residual in body frame
    Eigen::VectorXd out(5);
    out << next.pose.x, next.pose.y, next.pose.theta, next.shape.alpha1,
        next.shape.alpha2;
    return out;
  };

  // Q in predicted-body axes; rotate the translational block into world.
  UtStats pred = ukf_core::predict(state.mean, state.covariance, process,
                                   Mat5::Zero(), cfg.ut, kAngleDims);
  Mat5 q = cfg.fixed_q;
  if (cfg.gp) {
    q = Mat5::Zero();
    const double h = pred.mean[2];
    const double c = std::cos(h), s = std::sin(h);
    Mat2 rot;
    rot << c, -s, s, c;
    q.topLeftCorner<2, 2>() =
        rot * Vec2(residual_var[0], residual_var[1]).asDiagonal() * rot.transpose();
    q(2, 2) = residual_var[2];
    q(3, 3) = residual_var[3];
    q(4, 4) = residual_var[4];
  }

  FilterState out;
  out.mean = pred.mean;
  out.mean[2] = wrap_angle(out.mean[2]);
  out.covariance = make_psd(pred.cov + q);
  return out;
}

FilterState update(const FilterState& state, const Vec3& y, const Control& u,
                   const ChainParams& params, const FilterConfig& cfg,
                   int* shape_clamps) {
  Vec3 residual_mean = Vec3::Zero();
  Mat3 r_mat = cfg.fixed_r;
  if (cfg.gp) {
    const auto [m, v] = batch_diagonal_predict(cfg.gp->measurement,
                                               gp_query(state.mean, u.u));
    residual_mean = m;
    r_mat = v.asDiagonal();
  }

  auto measurement = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Vec2 r = clamped_shape(x[3], x[4], params.joint_limit, shape_clamps);
    const Shape shape(r[0], r[1], params.joint_limit);
    const Vec5 qd = dynamics_map(params, shape) * u.u;
    return gyro_predict(params, shape, ConfigVelocity::from_vec(qd)) +
           residual_mean;
  };

  UtStats post = ukf_core::update(state.mean, state.covariance, measurement,
                                  r_mat, y, cfg.ut, kAngleDims);
  FilterState out;
  out.mean = post.mean;
  out.covariance = post.cov;
  return out;
}

RunResult run(const Trajectory& traj, const FilterState& init,
              const ChainParams& params, const FilterConfig& cfg,
              bool use_truth) {
  traj.validate();
  if (traj.size() < 2) throw DataError("trajectory too short to filter");
  const auto t0 = std::chrono::steady_clock::now();
  const double dt = 1.0 / traj.rate_hz;

  RunResult res;
  FilterState state = init;
  for (size_t k = 0; k < traj.size(); ++k) {
    if (k > 0) {
      state = predict(state, traj.controls[k - 1], dt, params, cfg,
                      &res.shape_clamps);
    }
    res.prior_pos_trace.push_back(state.covariance(0, 0) +
                                  state.covariance(1, 1));
    state = update(state, traj.gyro[k], traj.controls[k], params, cfg,
                   &res.shape_clamps);

    res.t.push_back(traj.timestamps[k]);
    res.mean.push_back(state.mean);
    res.covariance.push_back(state.covariance);
    if (use_truth && !traj.truth.empty()) {
      const Config& tr = traj.truth[k];
      Vec5 e;
      e << state.mean[0] - tr.pose.x, state.mean[1] - tr.pose.y,
          wrap_angle(state.mean[2] - tr.pose.theta),
          wrap_angle(state.mean[3] - tr.shape.alpha1),
          wrap_angle(state.mean[4] - tr.shape.alpha2);
      res.error.push_back(e);
    }
  }
  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace salp
