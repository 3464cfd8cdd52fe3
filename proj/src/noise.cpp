#include "salp/noise.hpp"

namespace salp {

void Mixture::validate() const {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0))
    throw ConfigError("mixture sigmas must be > 0");
  if (w < 0.0 || w > 1.0) throw ConfigError("mixture weight must be in [0, 1]");
}

double Mixture::sample(Rng& rng) const {
  // One uniform for component choice, one normal draw; both consumed every
  // call so the stream layout does not depend on the outcome.
  const double pick = rng.uniform();
  const double z = rng.normal();
  return pick < w ? mu1 + sigma1 * z : mu2 + sigma2 * z;
}

double Mixture::variance() const {
  const double m = mean();
  const double v1 = sigma1 * sigma1 + (mu1 - m) * (mu1 - m);
  const double v2 = sigma2 * sigma2 + (mu2 - m) * (mu2 - m);
  return w * v1 + (1.0 - w) * v2;
}

void NoiseModel::validate() const {
  if (rate_hz <= 0.0) throw ConfigError("noise rate must be > 0");
  for (const auto& m : process) m.validate();
  for (const auto& m : measurement) m.validate();
}

NoiseModel NoiseModel::zero(double rate_hz) {
  NoiseModel n;
  n.rate_hz = rate_hz;
  return n;
}

NoiseModel NoiseModel::default_model() {
  NoiseModel n;
  n.rate_hz = 5.0;
  // Process channels: (dx, dy, dtheta, dalpha1, dalpha2) per 0.2 s step.
  n.process[0] = {1.0, 0.0, 1.2e-4, 0.0, 1e-300};
  n.process[1] = {1.0, 0.0, 1.2e-4, 0.0, 1e-300};
  n.process[2] = {1.0, 2.5e-4, 2.0e-4, 0.0, 1e-300};      // biased heading
  n.process[3] = {0.5, 1.5e-3, 7.0e-4, -1.5e-3, 7.0e-4};  // bimodal joint 1
  n.process[4] = {1.0, 0.0, 9.0e-4, 0.0, 1e-300};
  // Gyro channels, rad/s.
  for (auto& m : n.measurement) m = {1.0, 0.0, 0.01, 0.0, 1e-300};
  return n;
}

Vec5 NoiseModel::sample_process(Rng& rng) const {
  Vec5 v;
  for (int i = 0; i < 5; ++i) v[i] = process[static_cast<size_t>(i)].sample(rng);
  return v;
}

Vec3 NoiseModel::sample_measurement(Rng& rng) const {
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = measurement[static_cast<size_t>(i)].sample(rng);
  return v;
}

}  // namespace salp
