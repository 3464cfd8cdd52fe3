#include "salp/sim.hpp"

#include <cmath>
#include <sstream>

namespace salp {

Config config_boxplus(const Config& c, const Vec5& d, double joint_limit) {
  Config out;
  out.pose = compose(c.pose, Pose(d[0], d[1], d[2]));
  out.shape = Shape(c.shape.alpha1 + d[3], c.shape.alpha2 + d[4], joint_limit);
  return out;
}

Vec5 config_boxminus(const Config& c, const Config& reference) {
  const Pose rel = compose(inverse(reference.pose), c.pose);
  Vec5 d;
  d << rel.x, rel.y, rel.theta, c.shape.alpha1 - reference.shape.alpha1,
      c.shape.alpha2 - reference.shape.alpha2;
  return d;
}

namespace {

struct Qdot {
  Twist xi;
  Vec2 rdot;
};

Qdot eval_qdot(const ChainParams& params, const Vec2& r, const Vec3& u) {
  const Shape shape(r[0], r[1], params.joint_limit);
  const Vec5 qd = dynamics_map(params, shape) * u;
  return {Twist(qd[0], qd[1], qd[2]), Vec2(qd[3], qd[4])};
}

// dexpinv_theta(xi) truncated at the double bracket; sufficient for a
// 4th-order Munthe-Kaas step.
Twist dexpinv(const Twist& theta, const Twist& xi) {
  const Twist b1 = bracket(theta, xi);
  const Twist b2 = bracket(theta, b1);
  return {xi.vx - 0.5 * b1.vx + b2.vx / 12.0,
          xi.vy - 0.5 * b1.vy + b2.vy / 12.0,
          xi.omega - 0.5 * b1.omega + b2.omega / 12.0};
}

Twist scale(const Twist& a, double s) { return {a.vx * s, a.vy * s, a.omega * s}; }

// One Munthe-Kaas RK4 substep of length h. The shape block integrates as a
// classic RK4 in R^2; the pose accumulates the body twist through exp.
void substep(const ChainParams& params, const Vec3& u, double h, Pose& g, Vec2& r) {
  const Qdot k1 = eval_qdot(params, r, u);
  const Qdot k2 = eval_qdot(params, r + 0.5 * h * k1.rdot, u);
  const Qdot k3 = eval_qdot(params, r + 0.5 * h * k2.rdot, u);
  const Qdot k4 = eval_qdot(params, r + h * k3.rdot, u);

  const Twist t1 = k1.xi;
  const Twist t2 = dexpinv(scale(k1.xi, 0.5 * h), k2.xi);
  const Twist t3 = dexpinv(scale(k2.xi, 0.5 * h), k3.xi);
  const Twist t4 = dexpinv(scale(k3.xi, h), k4.xi);
  const Twist theta{h / 6.0 * (t1.vx + 2.0 * t2.vx + 2.0 * t3.vx + t4.vx),
                    h / 6.0 * (t1.vy + 2.0 * t2.vy + 2.0 * t3.vy + t4.vy),
                    h / 6.0 * (t1.omega + 2.0 * t2.omega + 2.0 * t3.omega + t4.omega)};

  g = compose(g, exp(theta));
  r += h / 6.0 * (k1.rdot + 2.0 * k2.rdot + 2.0 * k3.rdot + k4.rdot);
}

}  // namespace

Config step_truth(const ChainParams& params, const Config& config,
                  const Control& u, double dt, double max_substep) {
  if (dt <= 0.0) throw DataError("step_truth requires dt > 0");
  if (max_substep <= 0.0) throw DataError("step_truth requires max_substep > 0");
  const int n = std::max(1, static_cast<int>(std::ceil(dt / max_substep - 1e-12)));
  const double h = dt / n;

  Pose g = config.pose;
  Vec2 r = config.shape.vec();
  try {
    for (int k = 0; k < n; ++k) substep(params, u.u, h, g, r);
    return {g, Shape(r[0], r[1], params.joint_limit)};
  } catch (const DataError& e) {
    std::ostringstream os;
    os << "step rejected, shape limit violated during integration: " << e.what();
    throw DataError(os.str());
  }
}

void Trajectory::validate() const {
  const size_t n = timestamps.size();
  if (truth.size() != n || controls.size() != n || gyro.size() != n)
    throw DataError("trajectory columns have unequal lengths");
  if (n >= 2) {
    const double dt = timestamps[1] - timestamps[0];
    for (size_t k = 1; k < n; ++k)
      if (std::abs(timestamps[k] - timestamps[k - 1] - dt) > 1e-9)
        throw DataError("trajectory rate not uniform");
  }
}

Trajectory simulate(const ChainParams& params, const GaitProgram& gait,
                    double duration, double rate, const NoiseModel& noise,
                    uint64_t seed) {
  if (duration <= 0.0 || rate <= 0.0)
    throw DataError("simulate requires duration > 0 and rate > 0");
  params.validate();
  noise.validate();
  gait.validate(params.control_saturation);

  const double dt = 1.0 / rate;
  const auto steps = static_cast<size_t>(std::llround(duration * rate));
  Rng rng(seed);

  Trajectory traj;
  traj.rate_hz = rate;
  traj.seed = seed;
  traj.timestamps.reserve(steps + 1);
  traj.truth.reserve(steps + 1);
  traj.controls.reserve(steps + 1);
  traj.gyro.reserve(steps + 1);

  Config state;  // identity pose, zero shape
  for (size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Control u = control_at(gait, t);
    const Vec5 qd = dynamics_map(params, state.shape) * u.u;
    const Vec3 y =
        gyro_predict(params, state.shape, ConfigVelocity::from_vec(qd)) +
        noise.sample_measurement(rng);

    traj.timestamps.push_back(t);
    traj.truth.push_back(state);
    traj.controls.push_back(u);
    traj.gyro.push_back(y);

    if (k == steps) break;
    const Config nominal = step_truth(params, state, u, dt);
    state = config_boxplus(nominal, noise.sample_process(rng), params.joint_limit);
  }
  return traj;
}

std::pair<ResidualDataset, ResidualDataset> build_residual_datasets(
    const Trajectory& traj, const ChainParams& params, double rate) {
  traj.validate();
  if (rate <= 0.0) throw DataError("dataset rate must be > 0");
  const double ratio = traj.rate_hz / rate;
  const auto stride = static_cast<size_t>(std::llround(ratio));
  if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9)
    throw DataError("dataset rate must divide the trajectory rate");

  ResidualDataset df, dh;
  df.rate_hz = dh.rate_hz = rate;
  df.kind = ResidualKind::process;
  dh.kind = ResidualKind::measurement;

  // Pairs (k, k + stride) on the downsampled grid; both datasets use the
  // same sample set so a D-second run at R Hz yields exactly D*R points.
  const double dt = 1.0 / rate;
  for (size_t k = 0; k + stride < traj.size(); k += stride) {
    const Config& q = traj.truth[k];
    const Vec3& u = traj.controls[k].u;
    Vec5 input;
    input << q.shape.alpha1, q.shape.alpha2, u[0], u[1], u[2];

    const Vec5 qd = dynamics_map(params, q.shape) * u;
    const Vec3 gyro_hat =
        gyro_predict(params, q.shape, ConfigVelocity::from_vec(qd));
    dh.inputs.push_back(input);
    dh.targets.emplace_back(traj.gyro[k] - gyro_hat);

    const Config predicted = step_truth(params, q, traj.controls[k], dt);
    df.inputs.push_back(input);
    df.targets.emplace_back(config_boxminus(traj.truth[k + stride], predicted));
  }
  return {df, dh};
}

}  // namespace salp
