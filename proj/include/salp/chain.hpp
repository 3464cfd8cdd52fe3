#pragma once

#include <vector>

#include "salp/se2.hpp"
#include "salp/types.hpp"

namespace salp {

/// The two passive joint angles. Constructors reject values outside the
/// mechanical limit.
struct Shape {
  double alpha1 = 0.0;
  double alpha2 = 0.0;

  Shape() = default;
  Shape(double a1, double a2, double limit = M_PI / 2.0);

  Vec2 vec() const { return {alpha1, alpha2}; }
};

/// Full configuration: base pose plus shape.
struct Config {
  Pose pose;
  Shape shape;
};

/// Configuration velocity: base body twist plus joint rates.
struct ConfigVelocity {
  Twist xi;
  Vec2 alpha_dot = Vec2::Zero();

  Vec5 vec() const {
    Vec5 v;
    v << xi.vx, xi.vy, xi.omega, alpha_dot[0], alpha_dot[1];
    return v;
  }
  static ConfigVelocity from_vec(const Vec5& v) {
    return {{v[0], v[1], v[2]}, {v[3], v[4]}};
  }
};

/// Symmetric positive-semidefinite 3x3 viscous drag matrix of one unit,
/// ordered (x, y, theta) in the unit body frame.
struct DragMatrix {
  Mat3 m = Mat3::Zero();

  DragMatrix() = default;
  explicit DragMatrix(const Mat3& mat);

  static DragMatrix diagonal(double cxx, double cyy, double ctt);
};

/// Per-actuator commanded jet velocities [m/s].
struct Control {
  Vec3 u = Vec3::Zero();

  Control() = default;
  explicit Control(const Vec3& v) : u(v) {}
  Control(double u1, double u2, double u3) : u(u1, u2, u3) {}
};

/// Geometry, drag, and sensor-mount description of the chain.
///
/// Frames: link i carries its omniwheel unit at the link center, with the
/// unit x-axis rotated by beta[i] from the link axis (the controlled spin
/// direction). Joint j sits joint_offsets[j] ahead of link j's center and
/// the same distance behind link j+1's center. The base frame is rigidly
/// attached to link 1, offset so that at zero shape it coincides with the
/// centroid of the unit origins at the mean link orientation.
struct ChainParams {
  int n_units = 3;
  double link_length = 0.30;                 // m
  std::vector<double> beta;                  // rad, unit x-axis vs link axis
  std::vector<DragMatrix> unit_drag;         // per unit
  std::vector<double> joint_drag;            // N*m*s, per joint, >= 0
  std::vector<double> joint_offsets;         // m, per joint
  std::vector<Pose> imu_offsets;             // unit frame -> IMU frame
  double joint_limit = M_PI / 2.0;           // rad
  double control_saturation = 1.0;           // m/s

  /// Default three-unit chain: beta = (-57, -130, -57) deg, diagonal drag
  /// c_xx = 2, c_yy = 6, c_tt = 0.5, joint drag 0.2. The drag values are
  /// configurable placeholders; lateral > axial encodes the wheel
  /// anisotropy.
  static ChainParams default_params();

  void validate() const;
  int n_joints() const { return n_units - 1; }
};

/// Frames of every unit, joint, and IMU, expressed in the base frame.
struct FrameSet {
  std::vector<Pose> units;
  std::vector<Pose> joints;
  std::vector<Pose> imus;
};

FrameSet unit_frames(const ChainParams& params, const Shape& shape);

/// 3x5 Jacobian from configuration velocity to the body velocity of unit i
/// (0-based). Pose block is Ad^{-1} of the base-to-unit transform; the
/// column of joint j is the transported joint axis for j < i, zero
/// otherwise.
Mat35 unit_jacobian(const ChainParams& params, const Shape& shape, int i);

/// Same, for the IMU frame of unit i.
Mat35 imu_jacobian(const ChainParams& params, const Shape& shape, int i);

/// 5x5 generalized drag metric: sum of J^T C J over units plus joint drag
/// on the shape diagonal. Symmetric positive definite for valid params.
Mat5 drag_metric(const ChainParams& params, const Shape& shape);

/// 5x3 thrust map: column i is c_{i,xx} times the x-row of unit i's
/// Jacobian, transposed.
Mat53 thrust_map(const ChainParams& params, const Shape& shape);

/// Quasi-static dynamics map A(r) with qdot = A(r) u. Throws
/// NumericsError with the condition number if the drag metric is singular
/// beyond 1e12.
Mat53 dynamics_map(const ChainParams& params, const Shape& shape);

/// Expected gyro reading of each unit: the rotational component of the
/// IMU body velocity.
Vec3 gyro_predict(const ChainParams& params, const Shape& shape,
                  const ConfigVelocity& qdot);

}  // namespace salp
