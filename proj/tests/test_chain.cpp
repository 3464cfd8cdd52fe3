#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

#include "salp/chain.hpp"
#include "salp/rng.hpp"

using namespace salp;

namespace {

Shape random_shape(Rng& rng, double span = 1.2) {
  return Shape(rng.uniform(-span, span), rng.uniform(-span, span));
}

ConfigVelocity random_qdot(Rng& rng) {
  Vec5 v;
  for (int i = 0; i < 5; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return ConfigVelocity::from_vec(v);
}

// Unit pose in world coordinates for a full configuration.
Pose world_unit_pose(const ChainParams& p, const Config& q, int i, bool imu) {
  const FrameSet fs = unit_frames(p, q.shape);
  return compose(q.pose, imu ? fs.imus[static_cast<size_t>(i)]
                             : fs.units[static_cast<size_t>(i)]);
}

// Central finite difference of the unit pose along a configuration velocity.
Vec3 fd_unit_twist(const ChainParams& p, const Config& q,
                   const ConfigVelocity& qdot, int i, bool imu) {
  const double eps = 1e-6;
  auto shift = [&](double s) {
    Config c;
    c.pose = compose(q.pose, exp(qdot.xi, s));
    c.shape = Shape(q.shape.alpha1 + s * qdot.alpha_dot[0],
                    q.shape.alpha2 + s * qdot.alpha_dot[1]);
    return world_unit_pose(p, c, i, imu);
  };
  const Pose plus = shift(eps), minus = shift(-eps);
  const Twist t = log(compose(inverse(minus), plus));
  return t.vec() / (2.0 * eps);
}

}  // namespace

TEST_CASE("default params validate; bad params rejected") {
  ChainParams p = ChainParams::default_params();
  p.validate();

  ChainParams bad = p;
  bad.joint_drag[0] = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  ChainParams bad2 = p;
  Mat3 m = Mat3::Zero();
  m(0, 0) = -1.0;
  CHECK_THROWS_AS(DragMatrix{m}, ConfigError);
}

TEST_CASE("shape limits enforced") {
  CHECK_NOTHROW(Shape(1.0, -1.0));
  CHECK_THROWS_AS(Shape(2.0, 0.0), DataError);
  CHECK_THROWS_AS(Shape(0.0, -1.8), DataError);
  CHECK_NOTHROW(Shape(2.0, 0.0, 2.5));
}

TEST_CASE("zero shape: unit orientations equal beta, base at centroid") {
  const ChainParams p = ChainParams::default_params();
  const FrameSet fs = unit_frames(p, Shape(0, 0));
  const double deg = M_PI / 180.0;
  CHECK(fs.units[0].theta == doctest::Approx(-57.0 * deg));
  CHECK(fs.units[1].theta == doctest::Approx(-130.0 * deg));
  CHECK(fs.units[2].theta == doctest::Approx(-57.0 * deg));

  double cx = 0.0, cy = 0.0, mean_link = 0.0;
  for (int i = 0; i < 3; ++i) {
    cx += fs.units[static_cast<size_t>(i)].x;
    cy += fs.units[static_cast<size_t>(i)].y;
    mean_link += fs.units[static_cast<size_t>(i)].theta - p.beta[static_cast<size_t>(i)];
    CHECK(std::abs(fs.units[static_cast<size_t>(i)].y) < 1e-15);  // collinear on x-axis
  }
  CHECK(std::abs(cx / 3.0) < 1e-15);
  CHECK(std::abs(cy / 3.0) < 1e-15);
  CHECK(std::abs(mean_link / 3.0) < 1e-15);
}

TEST_CASE("frames agree with a sequential composition oracle") {
  const ChainParams p = ChainParams::default_params();
  const Shape shape(0.1, -0.1);
  const FrameSet fs = unit_frames(p, shape);

  // Independent chain: link 1 at origin, joints at +offset, base at the
  // zero-shape centroid of link centers.
  const double d = p.joint_offsets[0];
  const Pose l1(0, 0, 0);
  const Pose j1 = compose(l1, Pose(d, 0, 0));
  const Pose l2 = compose(j1, compose(Pose(0, 0, shape.alpha1), Pose(d, 0, 0)));
  const Pose j2 = compose(l2, Pose(d, 0, 0));
  const Pose l3 = compose(j2, compose(Pose(0, 0, shape.alpha2), Pose(d, 0, 0)));
  const Pose base(2.0 * d, 0, 0);

  const Pose u1 = compose(inverse(base), compose(l1, Pose(0, 0, p.beta[0])));
  const Pose u2 = compose(inverse(base), compose(l2, Pose(0, 0, p.beta[1])));
  const Pose u3 = compose(inverse(base), compose(l3, Pose(0, 0, p.beta[2])));

  auto close = [](const Pose& a, const Pose& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y),
                     std::abs(wrap_angle(a.theta - b.theta))}) < 1e-12;
  };
  CHECK(close(fs.units[0], u1));
  CHECK(close(fs.units[1], u2));
  CHECK(close(fs.units[2], u3));
  CHECK(close(fs.joints[0], compose(inverse(base), j1)));
  CHECK(close(fs.joints[1], compose(inverse(base), j2)));
}

TEST_CASE("unit jacobian structure") {
  const ChainParams p = ChainParams::default_params();
  const Shape zero(0, 0);
  const FrameSet fs = unit_frames(p, zero);

  for (int i = 0; i < 3; ++i) {
    const Mat35 jac = unit_jacobian(p, zero, i);
    const Mat3 expected = adjoint(inverse(fs.units[static_cast<size_t>(i)]));
    CHECK((jac.block<3, 3>(0, 0) - expected).cwiseAbs().maxCoeff() < 1e-14);
    // joint columns distal to unit i are identically zero
    for (int j = i; j < 2; ++j) CHECK(jac.col(3 + j).norm() == 0.0);
  }
}

TEST_CASE("unit and imu jacobians match finite differences") {
  ChainParams p = ChainParams::default_params();
  p.imu_offsets[0] = Pose(0.03, -0.01, 0.2);
  p.imu_offsets[1] = Pose(-0.02, 0.02, -0.4);
  p.imu_offsets[2] = Pose(0.01, 0.04, 1.0);

  Rng rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    Config q;
    q.pose = Pose(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3));
    q.shape = random_shape(rng);
    const ConfigVelocity qdot = random_qdot(rng);
    for (int i = 0; i < 3; ++i) {
      for (bool imu : {false, true}) {
        const Mat35 jac = imu ? imu_jacobian(p, q.shape, i)
                              : unit_jacobian(p, q.shape, i);
        const Vec3 analytic = jac * qdot.vec();
        const Vec3 fd = fd_unit_twist(p, q, qdot, i, imu);
        const double scale = std::max(1.0, analytic.norm());
        CHECK((analytic - fd).norm() / scale < 1e-6);
      }
    }
  }
}

TEST_CASE("imu jacobian equals unit jacobian for identity offsets") {
  const ChainParams p = ChainParams::default_params();
  Rng rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape s = random_shape(rng);
    for (int i = 0; i < 3; ++i) {
      CHECK((imu_jacobian(p, s, i) - unit_jacobian(p, s, i)).cwiseAbs().maxCoeff() ==
            0.0);
    }
  }
}

TEST_CASE("rotational row invariant under translational imu offsets") {
  ChainParams p = ChainParams::default_params();
  ChainParams p_off = p;
  p_off.imu_offsets = {Pose(0.05, 0.02, 0), Pose(-0.03, 0.01, 0), Pose(0.02, -0.04, 0)};
  Rng rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape s = random_shape(rng);
    for (int i = 0; i < 3; ++i) {
      const auto row_a = imu_jacobian(p, s, i).row(2);
      const auto row_b = imu_jacobian(p_off, s, i).row(2);
      CHECK((row_a - row_b).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("index out of range rejected") {
  const ChainParams p = ChainParams::default_params();
  CHECK_THROWS_AS(unit_jacobian(p, Shape(0, 0), -1), DataError);
  CHECK_THROWS_AS(unit_jacobian(p, Shape(0, 0), 3), DataError);
}

TEST_CASE("drag metric is symmetric positive definite at random shapes") {
  const ChainParams p = ChainParams::default_params();
  Rng rng(109);
  for (int trial = 0; trial < 1000; ++trial) {
    const Mat5 lam = drag_metric(p, random_shape(rng, 1.4));
    CHECK((lam - lam.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat5> es(lam);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("dissipativity: qdot' Lambda qdot >= 0") {
  const ChainParams p = ChainParams::default_params();
  Rng rng(113);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat5 lam = drag_metric(p, random_shape(rng));
    const Vec5 v = random_qdot(rng).vec();
    CHECK(v.dot(lam * v) >= 0.0);
  }
}

TEST_CASE("dynamics map linearity") {
  const ChainParams p = ChainParams::default_params();
  Rng rng(127);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s = random_shape(rng);
    const Mat53 a = dynamics_map(p, s);
    const Vec3 u(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double ca = rng.uniform(-2, 2), cb = rng.uniform(-2, 2);
    const Vec5 lhs = a * (ca * u + cb * v);
    const Vec5 rhs = ca * (a * u) + cb * (a * v);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK((dynamics_map(p, Shape(0.2, -0.3)) * Vec3::Zero()).norm() == 0.0);
}

TEST_CASE("dynamics map has rank 3 at generic shapes") {
  const ChainParams p = ChainParams::default_params();
  Rng rng(131);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat53 a = dynamics_map(p, random_shape(rng));
    Eigen::JacobiSVD<Mat53> svd(a);
    const auto& sv = svd.singularValues();
    CHECK(sv[2] > 1e-8 * sv[0]);  // three significant directions, rank <= 3 by width
  }
}

TEST_CASE("dynamics map agrees with a force-balance least-squares oracle") {
  const ChainParams p = ChainParams::default_params();
  Rng rng(137);

  // Generalized force for candidate qdot: thrust minus drag pulled back
  // through the unit Jacobians, plus joint drag.
  auto force = [&](const Shape& s, const Vec3& u, const Vec5& qdot) {
    Vec5 f = Vec5::Zero();
    for (int i = 0; i < 3; ++i) {
      const Mat35 jac = unit_jacobian(p, s, i);
      Vec3 thrust = Vec3::Zero();
      thrust[0] = p.unit_drag[static_cast<size_t>(i)].m(0, 0) * u[i];
      const Vec3 drag = -p.unit_drag[static_cast<size_t>(i)].m * (jac * qdot);
      f += jac.transpose() * (thrust + drag);
    }
    f[3] -= p.joint_drag[0] * qdot[3];
    f[4] -= p.joint_drag[1] * qdot[4];
    return f;
  };

  for (int trial = 0; trial < 20; ++trial) {
    const Shape s = random_shape(rng);
    const Vec3 u(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    // Probe the affine map qdot -> force and solve force = 0 generically.
    const Vec5 b = force(s, u, Vec5::Zero());
    Eigen::Matrix<double, 5, 5> m;
    for (int j = 0; j < 5; ++j) {
      Vec5 e = Vec5::Zero();
      e[j] = 1.0;
      m.col(j) = b - force(s, u, e);  // m qdot = b at equilibrium
    }
    const Vec5 oracle = m.colPivHouseholderQr().solve(b);
    const Vec5 direct = dynamics_map(p, s) * u;
    CHECK((oracle - direct).norm() / std::max(1.0, direct.norm()) < 1e-8);
  }
}

TEST_CASE("dynamics and gyro depend only on shape and control") {
  const ChainParams p = ChainParams::default_params();
  Rng rng(139);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape s = random_shape(rng);
    const ConfigVelocity qdot = random_qdot(rng);
    // The API admits no pose argument; assert bitwise stability across calls
    // interleaved with unrelated pose work.
    const Mat53 a1 = dynamics_map(p, s);
    const Vec3 g1 = gyro_predict(p, s, qdot);
    volatile double sink = compose(Pose(rng.uniform(-9, 9), 0, 1), Pose(1, 2, 3)).x;
    (void)sink;
    const Mat53 a2 = dynamics_map(p, s);
    const Vec3 g2 = gyro_predict(p, s, qdot);
    CHECK(std::memcmp(a1.data(), a2.data(), sizeof(double) * 15) == 0);
    CHECK(std::memcmp(g1.data(), g2.data(), sizeof(double) * 3) == 0);
  }
}

TEST_CASE("gyro: zero velocity and rigid rotation") {
  const ChainParams p = ChainParams::default_params();
  const Shape s(0.3, -0.2);
  CHECK(gyro_predict(p, s, ConfigVelocity{}).norm() == 0.0);

  ConfigVelocity rot;
  rot.xi = Twist(0, 0, 0.7);
  const Vec3 g = gyro_predict(p, s, rot);
  for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("gyro matches finite difference of imu frame orientation") {
  ChainParams p = ChainParams::default_params();
  p.imu_offsets[1] = Pose(0.02, -0.01, 0.3);
  Rng rng(149);
  for (int trial = 0; trial < 50; ++trial) {
    Config q;
    q.pose = Pose(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-3, 3));
    q.shape = random_shape(rng);
    const ConfigVelocity qdot = random_qdot(rng);
    const Vec3 gyro = gyro_predict(p, q.shape, qdot);

    const double eps = 1e-6;
    for (int i = 0; i < 3; ++i) {
      auto imu_angle = [&](double sgn) {
        Config c;
        c.pose = compose(q.pose, exp(qdot.xi, sgn * eps));
        c.shape = Shape(q.shape.alpha1 + sgn * eps * qdot.alpha_dot[0],
                        q.shape.alpha2 + sgn * eps * qdot.alpha_dot[1]);
        return world_unit_pose(p, c, i, true).theta;
      };
      const double fd = wrap_angle(imu_angle(1.0) - imu_angle(-1.0)) / (2.0 * eps);
      CHECK(std::abs(fd - gyro[i]) / std::max(1.0, std::abs(gyro[i])) < 1e-6);
    }
  }
}
