#pragma once

#include "salp/types.hpp"

namespace salp {

/// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

/// Planar rigid-body pose (element of SE(2)). theta is always stored
/// wrapped to (-pi, pi].
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose() = default;
  Pose(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  static Pose identity() { return {}; }

  Vec2 translation() const { return {x, y}; }
  Mat2 rotation() const;
};

/// Body-frame velocity (element of se(2)): forward, lateral, rotational.
struct Twist {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Twist() = default;
  Twist(double vx_, double vy_, double omega_) : vx(vx_), vy(vy_), omega(omega_) {}

  Vec3 vec() const { return {vx, vy, omega}; }
  static Twist from_vec(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

/// Group product g1 * g2.
Pose compose(const Pose& g1, const Pose& g2);

/// Group inverse.
Pose inverse(const Pose& g);

/// Exponential of dt * xi. Closed form with a series fallback for
/// |omega*dt| < 1e-6, continuous at omega = 0.
Pose exp(const Twist& xi, double dt = 1.0);

/// Logarithm: the twist xi with exp(xi, 1) == g.
Twist log(const Pose& g);

/// Adjoint of g acting on body twists, ordered (vx, vy, omega):
///   [ R   (y, -x)^T ]
///   [ 0       1     ]
Mat3 adjoint(const Pose& g);

/// adjoint(inverse(g)) without forming the inverse pose.
Mat3 adjoint_inverse(const Pose& g);

/// se(2) bracket [a, b].
Twist bracket(const Twist& a, const Twist& b);

}  // namespace salp
