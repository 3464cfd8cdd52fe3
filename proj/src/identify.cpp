#include "salp/identify.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <sstream>

#include "salp/rng.hpp"

namespace salp {

namespace {

constexpr int kRawParams = 20;   // 6 per unit x 3 + 2 joints
constexpr int kFreeParams = 19;  // unit-1 axial entry is the fixed gauge

// Lower-triangular entry order per unit: (0,0) (1,0) (1,1) (2,0) (2,1) (2,2).
const int kRow[6] = {0, 1, 1, 2, 2, 2};
const int kCol[6] = {0, 0, 1, 0, 1, 2};

struct Factors {
  Mat3 l[3];        // per-unit lower-triangular factors
  double s[2];      // joint drags are s^2
};

// Free-parameter layout: unit 1 entries 1..5, units 2..3 entries 0..5,
// then the two joint square roots.
Factors unpack(const Eigen::VectorXd& theta, double gauge_l00) {
  Factors f;
  int p = 0;
  for (int i = 0; i < 3; ++i) {
    f.l[i] = Mat3::Zero();
    for (int e = 0; e < 6; ++e) {
      if (i == 0 && e == 0) {
        f.l[i](0, 0) = gauge_l00;
        continue;
      }
      f.l[i](kRow[e], kCol[e]) = theta[p++];
    }
  }
  f.s[0] = theta[p++];
  f.s[1] = theta[p++];
  return f;
}

struct SampleGeometry {
  Mat35 jac[3];   // unit Jacobians
  Vec3 xi[3];     // unit body velocities J_i qdot
  Vec3 u;
  Vec2 alpha_dot;
};

std::vector<SampleGeometry> precompute(const std::vector<DragSample>& samples,
                                       const ChainParams& geometry) {
  std::vector<SampleGeometry> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    SampleGeometry g;
    for (int i = 0; i < 3; ++i) {
      g.jac[i] = unit_jacobian(geometry, s.shape, i);
      g.xi[i] = g.jac[i] * s.qdot;
    }
    g.u = s.u;
    g.alpha_dot = Vec2(s.qdot[3], s.qdot[4]);
    out.push_back(g);
  }
  return out;
}

// Residual of one sample: sum_i J_i^T (C_i xi_i - c_{i,xx} u_i e1) plus the
// joint-drag rows.
void sample_residual(const SampleGeometry& g, const Factors& f, Vec5& res) {
  res.setZero();
  for (int i = 0; i < 3; ++i) {
    const Mat3 c = f.l[i] * f.l[i].transpose();
    Vec3 force = c * g.xi[i];
    force[0] -= c(0, 0) * g.u[i];
    res.noalias() += g.jac[i].transpose() * force;
  }
  res[3] += f.s[0] * f.s[0] * g.alpha_dot[0];
  res[4] += f.s[1] * f.s[1] * g.alpha_dot[1];
}

// Analytic Jacobian of the residual w.r.t. the free parameters.
void sample_jacobian(const SampleGeometry& g, const Factors& f,
                     Eigen::Matrix<double, 5, kFreeParams>& jac) {
  jac.setZero();
  int p = 0;
  for (int i = 0; i < 3; ++i) {
    for (int e = 0; e < 6; ++e) {
      if (i == 0 && e == 0) continue;
      const int a = kRow[e], b = kCol[e];
      // dC = E_ab L^T + L E_ab^T
      Vec3 dc_xi = Vec3::Zero();
      dc_xi[a] += f.l[i].col(b).dot(g.xi[i]);
      dc_xi += f.l[i].col(b) * g.xi[i][a];
      if (a == 0) dc_xi[0] -= 2.0 * f.l[i](0, b) * g.u[i];
      jac.col(p++) = g.jac[i].transpose() * dc_xi;
    }
  }
  jac(3, p) = 2.0 * f.s[0] * g.alpha_dot[0];
  ++p;
  jac(4, p) = 2.0 * f.s[1] * g.alpha_dot[1];
}

double objective(const std::vector<SampleGeometry>& geo, const Factors& f) {
  Vec5 res;
  double obj = 0.0;
  for (const auto& g : geo) {
    sample_residual(g, f, res);
    obj += res.squaredNorm();
  }
  return obj;
}

// Residual as a linear map of the raw 20 drag parameters; used for the
// excitation check and the linear-least-squares starting point.
Eigen::MatrixXd raw_regressor(const SampleGeometry& g) {
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(5, kRawParams);
  for (int i = 0; i < 3; ++i) {
    for (int e = 0; e < 6; ++e) {
      const int a = kRow[e], b = kCol[e];
      // dC for the raw symmetric entry (a, b).
      Vec3 dc_xi = Vec3::Zero();
      dc_xi[a] += g.xi[i][b];
      if (a != b) dc_xi[b] += g.xi[i][a];
      if (a == 0 && b == 0) dc_xi[0] -= g.u[i];
      phi.col(6 * i + e) = g.jac[i].transpose() * dc_xi;
    }
  }
  phi(3, 18) = g.alpha_dot[0];
  phi(4, 19) = g.alpha_dot[1];
  return phi;
}

Mat3 raw_to_sym(const Eigen::VectorXd& raw, int unit) {
  Mat3 c;
  const int o = 6 * unit;
  c << raw[o + 0], raw[o + 1], raw[o + 3],
       raw[o + 1], raw[o + 2], raw[o + 4],
       raw[o + 3], raw[o + 4], raw[o + 5];
  return c;
}

// Nearest-PSD projection followed by a Cholesky-like factor.
Mat3 psd_factor(const Mat3& c) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (c + c.transpose()));
  Vec3 ev = es.eigenvalues().cwiseMax(1e-6);
  const Mat3 psd = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return Eigen::LLT<Mat3>(psd).matrixL();
}

}  // namespace

IdentifyResult identify_drag_samples(const std::vector<DragSample>& samples,
                                     const ChainParams& geometry,
                                     const IdentifyOptions& options) {
  if (geometry.n_units != 3)
    throw ConfigError("drag identification implemented for 3-unit chains");
  const size_t min_samples = 10 * kRawParams;
  if (samples.size() < min_samples) {
    std::ostringstream os;
    os << "insufficient data: " << samples.size() << " samples, need >= "
       << min_samples;
    throw DataError(os.str());
  }
  double gauge = options.axial_gauge;
  if (gauge == 0.0) gauge = geometry.unit_drag.empty() ? 1.0 : geometry.unit_drag[0].m(0, 0);
  if (gauge <= 0.0) throw ConfigError("axial gauge must be > 0");
  const double gauge_l00 = std::sqrt(gauge);

  const auto geo = precompute(samples, geometry);
  IdentifyResult result;

  // Excitation check and linear starting point in raw parameter space.
  const auto n_rows = static_cast<Eigen::Index>(5 * geo.size());
  Eigen::MatrixXd phi(n_rows, kRawParams);
  for (size_t k = 0; k < geo.size(); ++k)
    phi.middleRows(static_cast<Eigen::Index>(5 * k), 5) = raw_regressor(geo[k]);
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi);
    const double smin = svd.singularValues().minCoeff();
    result.regressor_condition =
        smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                   : std::numeric_limits<double>::infinity();
    if (result.regressor_condition > 1e6) {
      std::ostringstream os;
      os << "insufficient excitation: regressor condition number "
         << result.regressor_condition;
      result.warnings.push_back(os.str());
    }
  }

  // Solve the gauge-constrained linear problem for the seed estimate.
  Eigen::VectorXd raw_seed;
  {
    Eigen::VectorXd gauge_vec = Eigen::VectorXd::Zero(kRawParams);
    gauge_vec[0] = gauge;
    const Eigen::VectorXd rhs = -phi * gauge_vec;
    Eigen::MatrixXd phi_free(n_rows, kRawParams - 1);
    phi_free << phi.rightCols(kRawParams - 1);
    const Eigen::VectorXd sol =
        phi_free.colPivHouseholderQr().solve(rhs);
    raw_seed.resize(kRawParams);
    raw_seed[0] = gauge;
    raw_seed.tail(kRawParams - 1) = sol;
  }

  Rng rng(options.seed);
  Eigen::VectorXd best_theta;
  double best_obj = std::numeric_limits<double>::infinity();
  bool converged_any = false;

  for (int restart = 0; restart < options.restarts; ++restart) {
    Eigen::VectorXd theta(kFreeParams);
    if (restart == 0) {
      // Factor the projected linear estimate.
      int p = 0;
      for (int i = 0; i < 3; ++i) {
        Mat3 c = raw_to_sym(raw_seed, i);
        if (i == 0) c(0, 0) = gauge;
        const Mat3 l = psd_factor(c);
        for (int e = 0; e < 6; ++e) {
          if (i == 0 && e == 0) continue;
          theta[p++] = l(kRow[e], kCol[e]);
        }
      }
      theta[p++] = std::sqrt(std::max(1e-6, raw_seed[18]));
      theta[p++] = std::sqrt(std::max(1e-6, raw_seed[19]));
    } else {
      int p = 0;
      for (int i = 0; i < 3; ++i) {
        for (int e = 0; e < 6; ++e) {
          if (i == 0 && e == 0) continue;
          const bool diag = kRow[e] == kCol[e];
          theta[p++] = diag ? rng.uniform(0.2, 3.0) : rng.uniform(-0.8, 0.8);
        }
      }
      theta[p++] = rng.uniform(0.05, 1.5);
      theta[p++] = rng.uniform(0.05, 1.5);
    }

    // Levenberg-damped Gauss-Newton.
    Factors f = unpack(theta, gauge_l00);
    double obj = objective(geo, f);
    double lm = 1e-6;
    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
      Eigen::Matrix<double, kFreeParams, kFreeParams> jtj;
      jtj.setZero();
      Eigen::Matrix<double, kFreeParams, 1> jtr;
      jtr.setZero();
      Vec5 res;
      Eigen::Matrix<double, 5, kFreeParams> jk;
      for (const auto& g : geo) {
        sample_residual(g, f, res);
        sample_jacobian(g, f, jk);
        jtj.noalias() += jk.transpose() * jk;
        jtr.noalias() += jk.transpose() * res;
      }

      bool stepped = false;
      for (int attempt = 0; attempt < 12; ++attempt) {
        Eigen::Matrix<double, kFreeParams, kFreeParams> damped = jtj;
        damped.diagonal().array() += lm * (1.0 + jtj.diagonal().array());
        const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
        const Eigen::VectorXd trial = theta + delta;
        const Factors ft = unpack(trial, gauge_l00);
        const double trial_obj = objective(geo, ft);
        if (trial_obj < obj) {
          const double rel_drop = (obj - trial_obj) / std::max(obj, 1e-300);
          theta = trial;
          f = ft;
          obj = trial_obj;
          lm = std::max(lm * 0.3, 1e-12);
          stepped = true;
          if (rel_drop < 1e-14 || delta.norm() < 1e-13) converged = true;
          break;
        }
        lm *= 10.0;
      }
      if (!stepped || converged) {
        converged = converged || !stepped;
        break;
      }
    }
    converged_any = converged_any || converged;

    if (obj < best_obj) {
      best_obj = obj;
      best_theta = theta;
    }
  }

  if (!std::isfinite(best_obj))
    throw NumericsError("drag identification failed to converge");
  if (!converged_any)
    result.warnings.push_back("no restart met the convergence tolerance");

  const Factors f = unpack(best_theta, gauge_l00);
  ChainParams out = geometry;
  out.unit_drag.clear();
  for (int i = 0; i < 3; ++i)
    out.unit_drag.emplace_back(Mat3(f.l[i] * f.l[i].transpose()));
  out.joint_drag = {f.s[0] * f.s[0], f.s[1] * f.s[1]};
  result.params = out;
  result.objective = best_obj;
  return result;
}

IdentifyResult identify_drag(const std::vector<Trajectory>& trajectories,
                             const ChainParams& geometry,
                             const IdentifyOptions& options) {
  std::vector<DragSample> samples;
  for (const auto& traj : trajectories) {
    traj.validate();
    if (traj.size() < 2) continue;
    const double dt = traj.timestamps[1] - traj.timestamps[0];
    for (size_t k = 0; k + 1 < traj.size(); ++k) {
      const Config& here = traj.truth[k];
      const Config& next = traj.truth[k + 1];
      // Groupwise difference across one zero-order-hold interval: the log
      // map gives the mean body twist under the control active on exactly
      // that interval; Jacobians evaluate at the midpoint shape.
      const Twist xi = log(compose(inverse(here.pose), next.pose));
      DragSample s;
      s.shape = Shape(0.5 * (here.shape.alpha1 + next.shape.alpha1),
                      0.5 * (here.shape.alpha2 + next.shape.alpha2),
                      geometry.joint_limit);
      s.qdot << xi.vx / dt, xi.vy / dt, xi.omega / dt,
          (next.shape.alpha1 - here.shape.alpha1) / dt,
          (next.shape.alpha2 - here.shape.alpha2) / dt;
      s.u = traj.controls[k].u;
      samples.push_back(s);
    }
  }
  return identify_drag_samples(samples, geometry, options);
}

}  // namespace salp
