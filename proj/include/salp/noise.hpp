#pragma once

#include <array>

#include "salp/rng.hpp"
#include "salp/types.hpp"

namespace salp {

/// Two-component Gaussian mixture for one residual channel.
struct Mixture {
  double w = 1.0;      // weight of component 1, in [0, 1]
  double mu1 = 0.0;
  double sigma1 = 1e-300;
  double mu2 = 0.0;
  double sigma2 = 1e-300;

  void validate() const;
  double sample(Rng& rng) const;
  double mean() const { return w * mu1 + (1.0 - w) * mu2; }
  double variance() const;
};

/// Per-channel residual noise applied once per sample at the dataset rate:
/// five process channels (body-frame pose increment dx, dy, dtheta and the
/// two joint increments) and three gyro measurement channels.
struct NoiseModel {
  double rate_hz = 5.0;
  std::array<Mixture, 5> process;
  std::array<Mixture, 3> measurement;

  void validate() const;

  /// Effectively zero noise (sigma at the representable floor, as the
  /// invariants require sigma > 0).
  static NoiseModel zero(double rate_hz = 5.0);

  /// Default emulation of the observed residual structure: biased base
  /// heading increments, a bimodal first-joint channel, and zero-mean
  /// gyro noise with sigma = 0.01 rad/s.
  static NoiseModel default_model();

  Vec5 sample_process(Rng& rng) const;
  Vec3 sample_measurement(Rng& rng) const;
};

}  // namespace salp
