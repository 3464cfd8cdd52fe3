#include "salp/chain.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace salp {

Shape::Shape(double a1, double a2, double limit) : alpha1(a1), alpha2(a2) {
  if (std::abs(a1) > limit || std::abs(a2) > limit) {
    std::ostringstream os;
    os << "joint angles (" << a1 << ", " << a2 << ") exceed limit +/-" << limit;
    throw DataError(os.str());
  }
}

DragMatrix::DragMatrix(const Mat3& mat) : m(mat) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("drag matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> es(m);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw ConfigError("drag matrix not positive semidefinite");
}

DragMatrix DragMatrix::diagonal(double cxx, double cyy, double ctt) {
  Mat3 m = Mat3::Zero();
  m(0, 0) = cxx;
  m(1, 1) = cyy;
  m(2, 2) = ctt;
  return DragMatrix(m);
}

ChainParams ChainParams::default_params() {
  ChainParams p;
  p.n_units = 3;
  p.link_length = 0.30;
  const double deg = M_PI / 180.0;
  p.beta = {-57.0 * deg, -130.0 * deg, -57.0 * deg};
  p.unit_drag.assign(3, DragMatrix::diagonal(2.0, 6.0, 0.5));
  p.joint_drag = {0.2, 0.2};
  p.joint_offsets = {0.15, 0.15};
  p.imu_offsets.assign(3, Pose::identity());
  return p;
}

void ChainParams::validate() const {
  if (n_units < 2) throw ConfigError("need at least two units");
  const auto sz = static_cast<size_t>(n_units);
  if (beta.size() != sz || unit_drag.size() != sz || imu_offsets.size() != sz)
    throw ConfigError("per-unit field size mismatch");
  const auto jz = static_cast<size_t>(n_joints());
  if (joint_drag.size() != jz || joint_offsets.size() != jz)
    throw ConfigError("per-joint field size mismatch");
  for (double cj : joint_drag)
    if (cj < 0.0) throw ConfigError("joint drag must be >= 0");
  for (const auto& c : unit_drag) {
    DragMatrix check(c.m);  // re-run symmetry/PSD checks
    if (c.m(0, 0) <= 0.0) throw ConfigError("unit c_xx must be > 0");
  }
  if (link_length <= 0.0) throw ConfigError("link length must be > 0");
  if (control_saturation <= 0.0) throw ConfigError("saturation must be > 0");
}

namespace {

// Link and joint frames in link-1 coordinates. links[i] at link centers,
// joints[j] at the interface, oriented with the proximal link.
struct LinkChain {
  std::vector<Pose> links;
  std::vector<Pose> joints;
};

LinkChain build_links(const ChainParams& p, const Shape& shape) {
  LinkChain c;
  c.links.push_back(Pose::identity());
  const double a[2] = {shape.alpha1, shape.alpha2};
  for (int j = 0; j < p.n_joints(); ++j) {
    const double d = p.joint_offsets[static_cast<size_t>(j)];
    const Pose joint = compose(c.links.back(), Pose(d, 0.0, 0.0));
    c.joints.push_back(joint);
    c.links.push_back(
        compose(joint, compose(Pose(0.0, 0.0, a[j]), Pose(d, 0.0, 0.0))));
  }
  return c;
}

// Base frame in link-1 coordinates: rigid offset placing it at the unit
// centroid when the shape is zero.
Pose base_in_link1(const ChainParams& p) {
  double cx = 0.0;
  for (int j = 0; j < p.n_joints(); ++j)
    cx += 2.0 * p.joint_offsets[static_cast<size_t>(j)] * (p.n_units - 1 - j);
  return Pose(cx / p.n_units, 0.0, 0.0);
}

// Third column of Ad_{g}: depends on the translation only.
Vec3 joint_axis_column(const Pose& joint_in_frame) {
  return {joint_in_frame.y, -joint_in_frame.x, 1.0};
}

Mat35 frame_jacobian(const ChainParams& p, const Shape& shape, int i,
                     const Pose& target_frame_in_base,
                     const std::vector<Pose>& joints_in_base) {
  Mat35 jac = Mat35::Zero();
  jac.block<3, 3>(0, 0) = adjoint_inverse(target_frame_in_base);
  const Pose inv_target = inverse(target_frame_in_base);
  for (int j = 0; j < p.n_joints(); ++j) {
    if (j < i) {
      const Pose joint_in_target =
          compose(inv_target, joints_in_base[static_cast<size_t>(j)]);
      jac.col(3 + j) = joint_axis_column(joint_in_target);
    }
  }
  return jac;
}

}  // namespace

FrameSet unit_frames(const ChainParams& params, const Shape& shape) {
  Shape checked(shape.alpha1, shape.alpha2, params.joint_limit);
  const LinkChain chain = build_links(params, checked);
  const Pose base_inv = inverse(base_in_link1(params));

  FrameSet fs;
  for (int i = 0; i < params.n_units; ++i) {
    const Pose unit = compose(chain.links[static_cast<size_t>(i)],
                              Pose(0.0, 0.0, params.beta[static_cast<size_t>(i)]));
    fs.units.push_back(compose(base_inv, unit));
    fs.imus.push_back(
        compose(fs.units.back(), params.imu_offsets[static_cast<size_t>(i)]));
  }
  for (const Pose& j : chain.joints) fs.joints.push_back(compose(base_inv, j));
  return fs;
}

Mat35 unit_jacobian(const ChainParams& params, const Shape& shape, int i) {
  if (i < 0 || i >= params.n_units) throw DataError("unit index out of range");
  const FrameSet fs = unit_frames(params, shape);
  return frame_jacobian(params, shape, i, fs.units[static_cast<size_t>(i)],
                        fs.joints);
}

Mat35 imu_jacobian(const ChainParams& params, const Shape& shape, int i) {
  if (i < 0 || i >= params.n_units) throw DataError("unit index out of range");
  const FrameSet fs = unit_frames(params, shape);
  return frame_jacobian(params, shape, i, fs.imus[static_cast<size_t>(i)],
                        fs.joints);
}

Mat5 drag_metric(const ChainParams& params, const Shape& shape) {
  const FrameSet fs = unit_frames(params, shape);
  Mat5 lambda = Mat5::Zero();
  for (int i = 0; i < params.n_units; ++i) {
    const Mat35 jac =
        frame_jacobian(params, shape, i, fs.units[static_cast<size_t>(i)], fs.joints);
    lambda += jac.transpose() * params.unit_drag[static_cast<size_t>(i)].m * jac;
  }
  for (int j = 0; j < params.n_joints(); ++j)
    lambda(3 + j, 3 + j) += params.joint_drag[static_cast<size_t>(j)];
  return lambda;
}

Mat53 thrust_map(const ChainParams& params, const Shape& shape) {
  const FrameSet fs = unit_frames(params, shape);
  Mat53 lu = Mat53::Zero();
  for (int i = 0; i < params.n_units; ++i) {
    const Mat35 jac =
        frame_jacobian(params, shape, i, fs.units[static_cast<size_t>(i)], fs.joints);
    lu.col(i) = jac.row(0).transpose() *
                params.unit_drag[static_cast<size_t>(i)].m(0, 0);
  }
  return lu;
}

Mat53 dynamics_map(const ChainParams& params, const Shape& shape) {
  const FrameSet fs = unit_frames(params, shape);
  Mat5 lambda = Mat5::Zero();
  Mat53 lu = Mat53::Zero();
  for (int i = 0; i < params.n_units; ++i) {
    const Mat35 jac =
        frame_jacobian(params, shape, i, fs.units[static_cast<size_t>(i)], fs.joints);
    const Mat3& c = params.unit_drag[static_cast<size_t>(i)].m;
    lambda += jac.transpose() * c * jac;
    lu.col(i) = jac.row(0).transpose() * c(0, 0);
  }
  for (int j = 0; j < params.n_joints(); ++j)
    lambda(3 + j, 3 + j) += params.joint_drag[static_cast<size_t>(j)];

  Eigen::LLT<Mat5> llt(lambda);
  bool suspect = llt.info() != Eigen::Success;
  if (!suspect) {
    const auto d = llt.matrixLLT().diagonal();
    const double ratio = d.maxCoeff() / d.minCoeff();
    suspect = ratio * ratio > 1e12;
  }
  if (suspect) {
    Eigen::SelfAdjointEigenSolver<Mat5> es(lambda);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(cond < 1e12)) {
      std::ostringstream os;
      os << "drag metric singular or ill-conditioned, cond = " << cond;
      throw NumericsError(os.str());
    }
  }
  return llt.solve(lu);
}

Vec3 gyro_predict(const ChainParams& params, const Shape& shape,
                  const ConfigVelocity& qdot) {
  const FrameSet fs = unit_frames(params, shape);
  const Vec5 v = qdot.vec();
  Vec3 out;
  for (int i = 0; i < params.n_units; ++i) {
    const Mat35 jac =
        frame_jacobian(params, shape, i, fs.imus[static_cast<size_t>(i)], fs.joints);
    out[i] = jac.row(2) * v;
  }
  return out;
}

}  // namespace salp
