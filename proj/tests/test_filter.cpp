#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "salp/gait.hpp"
#include "salp/pipeline.hpp"
#include "salp/rng.hpp"
#include "salp/sim.hpp"
#include "salp/ukf.hpp"

using namespace salp;

namespace {

Eigen::MatrixXd random_psd(Rng& rng, int n, double scale) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-1, 1);
  return scale * (a * a.transpose()) / n;
}

// Hand-rolled scaled-UT predict (plain arithmetic statistics), used as the
// reference implementation for the generic core.
void plain_ukf_predict(Eigen::VectorXd& x, Eigen::MatrixXd& p,
                       const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                       const Eigen::MatrixXd& q, double alpha, double beta,
                       double kappa) {
  const int n = static_cast<int>(x.size());
  const double lambda = alpha * alpha * (n + kappa) - n;
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(p).matrixL();
  std::vector<Eigen::VectorXd> pts;
  pts.push_back(x);
  for (int i = 0; i < n; ++i) {
    pts.push_back(x + std::sqrt(n + lambda) * l.col(i));
    pts.push_back(x - std::sqrt(n + lambda) * l.col(i));
  }
  std::vector<double> wm(static_cast<size_t>(2 * n + 1), 1.0 / (2 * (n + lambda)));
  std::vector<double> wc = wm;
  wm[0] = lambda / (n + lambda);
  wc[0] = wm[0] + 1.0 - alpha * alpha + beta;

  std::vector<Eigen::VectorXd> prop;
  prop.reserve(pts.size());
  for (const auto& pt : pts) prop.push_back(f(pt));
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (size_t j = 0; j < prop.size(); ++j) mean += wm[j] * prop[j];
  Eigen::MatrixXd cov = q;
  for (size_t j = 0; j < prop.size(); ++j)
    cov += wc[j] * (prop[j] - mean) * (prop[j] - mean).transpose();
  x = mean;
  p = cov;
}

}  // namespace

TEST_CASE("sigma points: zero covariance collapses to the mean") {
  Eigen::VectorXd mean(3);
  mean << 1.0, -2.0, 0.5;
  const SigmaSet s = sigma_points(mean, Eigen::MatrixXd::Zero(3, 3), UtParams{});
  for (int j = 0; j < 7; ++j)
    CHECK((s.points.col(j) - mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sigma points: identity covariance puts points at mean +- sqrt(n) e_i") {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
  const SigmaSet s =
      sigma_points(mean, Eigen::MatrixXd::Identity(5, 5), UtParams{1.0, 2.0, 0.0});
  for (int i = 0; i < 5; ++i) {
    CHECK(s.points(i, 1 + i) == doctest::Approx(std::sqrt(5.0)));
    CHECK(s.points(i, 6 + i) == doctest::Approx(-std::sqrt(5.0)));
  }
  CHECK(s.wm.sum() == doctest::Approx(1.0));
}

TEST_CASE("sigma points reconstruct mean and covariance") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5;
    Eigen::VectorXd mean(n);
    for (int i = 0; i < n; ++i) mean[i] = rng.uniform(-2, 2);
    mean[2] = rng.uniform(-3, 3);
    const Eigen::MatrixXd cov = random_psd(rng, n, 0.05);
    const std::vector<int> angle_dims = {2, 3, 4};
    const SigmaSet s = sigma_points(mean, cov, UtParams{}, angle_dims);
    const UtStats stats = ut_recombine(s.points, s.wm, s.wc, angle_dims);
    CHECK((stats.mean.head(2) - mean.head(2)).cwiseAbs().maxCoeff() < 1e-10);
    for (int d : angle_dims)
      CHECK(std::abs(wrap_angle(stats.mean[d] - mean[d])) < 1e-10);
    CHECK((stats.cov - cov).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("circular mean handles the pi wrap") {
  Eigen::VectorXd mean(2);
  mean << 0.0, M_PI - 0.01;  // heading near the wrap
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2) * 0.04;
  const std::vector<int> angle_dims = {1};
  const SigmaSet s = sigma_points(mean, cov, UtParams{}, angle_dims);
  const UtStats stats = ut_recombine(s.points, s.wm, s.wc, angle_dims);
  CHECK(std::abs(wrap_angle(stats.mean[1] - mean[1])) < 1e-10);
  CHECK(stats.cov(1, 1) == doctest::Approx(0.04).epsilon(1e-9));
}

TEST_CASE("generic core matches a plain UKF reference on a nonlinear system") {
  auto f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(3);
    y << x[0] + 0.1 * std::sin(x[1]), x[1] + 0.1 * x[2],
        0.95 * x[2] + 0.01 * x[0] * x[0];
    return y;
  };
  Rng rng(11);
  Eigen::VectorXd x(3);
  x << 0.3, -0.2, 0.5;
  Eigen::MatrixXd p = random_psd(rng, 3, 0.1) + 0.01 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd q = 0.001 * Eigen::MatrixXd::Identity(3, 3);

  Eigen::VectorXd x_ref = x;
  Eigen::MatrixXd p_ref = p;
  for (int k = 0; k < 50; ++k) {
    const UtStats s = ukf_core::predict(x, p, f, q, UtParams{});
    x = s.mean;
    p = s.cov;
    plain_ukf_predict(x_ref, p_ref, f, q, 1.0, 2.0, 0.0);
    CHECK((x - x_ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((p - p_ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("generic core equals the closed-form Kalman filter on a linear system") {
  const int n = 5, m = 3;
  Rng rng(13);
  Eigen::MatrixXd f_mat = Eigen::MatrixXd::Identity(n, n);
  f_mat(0, 2) = 0.1;
  f_mat(1, 3) = -0.05;
  f_mat(2, 2) = 0.98;
  f_mat(3, 4) = 0.07;
  Eigen::MatrixXd h_mat(m, n);
  h_mat.setZero();
  h_mat(0, 2) = 1.0;
  h_mat(1, 3) = 1.0;
  h_mat(2, 4) = 1.0;
  const Eigen::MatrixXd q = 1e-4 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = 1e-3 * Eigen::MatrixXd::Identity(m, m);

  Eigen::VectorXd x_u = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd p_u = 0.1 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x_k = x_u;
  Eigen::MatrixXd p_k = p_u;

  auto process = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(f_mat * x); };
  auto meas = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(h_mat * x); };

  for (int k = 0; k < 500; ++k) {
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) y[i] = rng.uniform(-0.2, 0.2);

    const UtStats pred = ukf_core::predict(x_u, p_u, process, q, UtParams{});
    const UtStats post = ukf_core::update(pred.mean, pred.cov, meas, r, y, UtParams{});
    x_u = post.mean;
    p_u = post.cov;

    x_k = f_mat * x_k;
    p_k = f_mat * p_k * f_mat.transpose() + q;
    const Eigen::MatrixXd s_k = h_mat * p_k * h_mat.transpose() + r;
    const Eigen::MatrixXd k_gain = p_k * h_mat.transpose() * s_k.inverse();
    x_k = x_k + k_gain * (y - h_mat * x_k);
    p_k = p_k - k_gain * s_k * k_gain.transpose();

    CHECK((x_u - x_k).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((p_u - p_k).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("chain predict: zero-residual GPs and zero control hold the state") {
  const RunConfig cfg;
  Rng rng(17);
  Eigen::MatrixXd x(120, 5);
  for (Eigen::Index i = 0; i < 120; ++i)
    for (Eigen::Index k = 0; k < 5; ++k) x(i, k) = rng.uniform(-0.3, 0.3);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(120);
  EnhancedGpModels gp;
  for (int i = 0; i < 5; ++i)
    gp.process.push_back(fit(x, zero, {}, static_cast<uint64_t>(20 + i)));
  for (int i = 0; i < 3; ++i)
    gp.measurement.push_back(fit(x, zero, {}, static_cast<uint64_t>(30 + i)));
  gp.validate();

  FilterConfig fc;
  fc.gp = &gp;
  FilterState st;
  st.mean << 0.3, -0.2, 0.4, 0.1, -0.1;
  st.covariance = Mat5::Identity() * 1e-4;

  const FilterState next = predict(st, Control(0, 0, 0), 0.2, cfg.params, fc);
  CHECK((next.mean - st.mean).cwiseAbs().maxCoeff() < 1e-7);
  const Mat5 growth = next.covariance - st.covariance;
  CHECK(growth.cwiseAbs().maxCoeff() < 1e-6);  // only the GP variance floor
  Eigen::SelfAdjointEigenSolver<Mat5> es(growth);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("chain update: exact measurement leaves mean, shrinks trace") {
  const RunConfig cfg;
  FilterConfig fc;
  fc.fixed_r = Mat3::Identity() * 1e-4;
  FilterState st;
  st.mean << 0.1, 0.2, 0.15, 0.05, -0.12;
  st.covariance = Mat5::Identity() * 4e-4;

  const Control u(0.2, -0.1, 0.15);
  const SigmaSet s = sigma_points(st.mean, st.covariance, fc.ut, {2, 3, 4});
  Vec3 y_pred = Vec3::Zero();
  for (Eigen::Index j = 0; j < s.points.cols(); ++j) {
    const Shape shape(s.points(3, j), s.points(4, j));
    const Vec5 qd = dynamics_map(cfg.params, shape) * u.u;
    y_pred += s.wm[j] * gyro_predict(cfg.params, shape, ConfigVelocity::from_vec(qd));
  }

  const FilterState post = update(st, y_pred, u, cfg.params, fc);
  CHECK((post.mean - st.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(post.covariance.trace() <= st.covariance.trace() + 1e-15);
}

TEST_CASE("chain update: huge R makes the measurement uninformative") {
  const RunConfig cfg;
  FilterConfig fc;
  fc.fixed_r = Mat3::Identity() * 1e6;
  FilterState st;
  st.mean << 0.0, 0.0, 0.1, 0.08, -0.03;
  st.covariance = Mat5::Identity() * 1e-3;
  const FilterState post =
      update(st, Vec3(0.5, -0.4, 0.2), Control(0.1, 0.1, 0.1), cfg.params, fc);
  CHECK((post.mean - st.mean).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((post.covariance - st.covariance).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("noise-free run with exact init tracks to 1e-6") {
  const RunConfig cfg;
  const Trajectory traj = simulate(cfg.params, cfg.gaits.at("forward"), 20.0, 5.0,
                                   NoiseModel::zero(), 5);
  FilterConfig fc;
  fc.fixed_q = Mat5::Identity() * 1e-18;
  fc.fixed_r = Mat3::Identity() * 1e-12;
  FilterState init;
  init.covariance = Mat5::Identity() * 1e-12;
  const RunResult res = run(traj, init, cfg.params, fc);
  REQUIRE(res.error.size() == traj.size());
  for (const auto& e : res.error) CHECK(e.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("covariance stays symmetric PSD through a noisy run") {
  const RunConfig cfg;
  const Trajectory traj = simulate(cfg.params, cfg.gaits.at("turn"), 30.0, 5.0,
                                   NoiseModel::default_model(), 21);
  FilterConfig fc;
  fc.fixed_q = Mat5::Identity() * 1e-7;
  fc.fixed_r = Mat3::Identity() * 1e-4;
  const RunResult res = run(traj, initial_state(cfg, traj.truth[0]), cfg.params, fc);
  for (const auto& p : res.covariance) {
    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat5> es(p);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
  for (const auto& m : res.mean) {
    CHECK(m[2] > -M_PI);
    CHECK(m[2] <= M_PI);
  }
}

TEST_CASE("dead reckoning: position covariance grows across gait cycles") {
  const RunConfig cfg;
  const Trajectory traj = simulate(cfg.params, cfg.gaits.at("forward"), 60.0, 5.0,
                                   NoiseModel::zero(), 31);
  FilterConfig fc;
  fc.fixed_q = Mat5::Identity() * 1e-8;
  FilterState st = initial_state(cfg, traj.truth[0]);
  double prev = st.covariance(0, 0) + st.covariance(1, 1);
  for (size_t k = 1; k < traj.size(); ++k) {
    st = predict(st, traj.controls[k - 1], 0.2, cfg.params, fc);
    if (k % 30 == 0) {  // 6 s gait cycle at 5 Hz
      const double tr = st.covariance(0, 0) + st.covariance(1, 1);
      CHECK(tr >= prev - 1e-15);
      prev = tr;
    }
  }
}

TEST_CASE("heading wrap: estimates stay in (-pi, pi] across the seam") {
  const RunConfig cfg;
  Trajectory traj = simulate(cfg.params, cfg.gaits.at("turn"), 40.0, 5.0,
                             NoiseModel::zero(), 3);
  const Pose shift(0.0, 0.0, M_PI - 0.05);
  for (auto& c : traj.truth) c.pose = compose(shift, c.pose);

  FilterConfig fc;
  fc.fixed_q = Mat5::Identity() * 1e-10;
  fc.fixed_r = Mat3::Identity() * 1e-6;
  const RunResult res = run(traj, initial_state(cfg, traj.truth[0]), cfg.params, fc);
  bool crossed = false;
  for (size_t k = 0; k < res.t.size(); ++k) {
    CHECK(res.mean[k][2] > -M_PI);
    CHECK(res.mean[k][2] <= M_PI);
    CHECK(std::abs(res.error[k][2]) < 0.02);  // wrapped error stays small
    if (std::abs(res.mean[k][2]) > 3.0) crossed = true;
  }
  CHECK(crossed);  // the run actually exercised the seam
}

TEST_CASE("shape clamp warnings are counted") {
  ChainParams tight = ChainParams::default_params();
  tight.joint_limit = 0.01;
  FilterConfig fc;
  fc.fixed_q = Mat5::Identity() * 1e-8;
  FilterState st;
  st.covariance = Mat5::Identity() * 0.25;  // sigma points far past the limit
  int clamps = 0;
  predict(st, Control(0, 0, 0), 0.2, tight, fc, &clamps);
  CHECK(clamps > 0);
}

TEST_CASE("ut params validated") {
  UtParams bad;
  bad.alpha_ut = 0.0;
  bad.kappa_ut = 0.0;
  CHECK_THROWS_AS(bad.validate(5), ConfigError);
}
