#include "salp/se2.hpp"

#include <cmath>

namespace salp {

double wrap_angle(double theta) {
  if (theta > -M_PI && theta <= M_PI) return theta;
  double t = std::remainder(theta, 2.0 * M_PI);  // (-pi, pi], except -pi
  if (t <= -M_PI) t = M_PI;
  return t;
}

Mat2 Pose::rotation() const {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Pose compose(const Pose& g1, const Pose& g2) {
  const double c = std::cos(g1.theta), s = std::sin(g1.theta);
  return {g1.x + c * g2.x - s * g2.y, g1.y + s * g2.x + c * g2.y,
          g1.theta + g2.theta};
}

Pose inverse(const Pose& g) {
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  return {-(c * g.x + s * g.y), -(-s * g.x + c * g.y), -g.theta};
}

namespace {

// a = sin(phi)/phi, b = (1 - cos(phi))/phi, series below 1e-6.
void exp_coeffs(double phi, double& a, double& b) {
  if (std::abs(phi) < 1e-6) {
    const double p2 = phi * phi;
    a = 1.0 - p2 / 6.0 + p2 * p2 / 120.0;
    b = phi / 2.0 - p2 * phi / 24.0;
  } else {
    a = std::sin(phi) / phi;
    b = (1.0 - std::cos(phi)) / phi;
  }
}

}  // namespace

Pose exp(const Twist& xi, double dt) {
  const double phi = xi.omega * dt;
  double a, b;
  exp_coeffs(phi, a, b);
  const double ux = xi.vx * dt, uy = xi.vy * dt;
  return {a * ux - b * uy, b * ux + a * uy, phi};
}

Twist log(const Pose& g) {
  const double phi = g.theta;
  double a, b;
  exp_coeffs(phi, a, b);
  const double den = a * a + b * b;  // (2 - 2 cos phi)/phi^2, > 0 on (-pi, pi]
  return {(a * g.x + b * g.y) / den, (-b * g.x + a * g.y) / den, phi};
}

Mat3 adjoint(const Pose& g) {
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  Mat3 ad;
  ad << c, -s, g.y,
        s,  c, -g.x,
        0,  0, 1;
  return ad;
}

Mat3 adjoint_inverse(const Pose& g) {
  return adjoint(inverse(g));
}

Twist bracket(const Twist& a, const Twist& b) {
  return {b.omega * a.vy - a.omega * b.vy,
          a.omega * b.vx - b.omega * a.vx, 0.0};
}

}  // namespace salp
