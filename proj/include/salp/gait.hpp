#pragma once

#include <array>
#include <map>
#include <string>

#include "salp/chain.hpp"
#include "salp/types.hpp"

namespace salp {

/// First-order Fourier control program: per actuator i,
///   u_i(t) = a0_i + a1_i cos(2 pi t / T) + b1_i sin(2 pi t / T).
struct GaitProgram {
  double period = 6.0;                 // s
  std::array<double, 3> a0{0, 0, 0};   // m/s
  std::array<double, 3> a1{0, 0, 0};
  std::array<double, 3> b1{0, 0, 0};

  /// Peak |u_i| over a cycle: |a0_i| + hypot(a1_i, b1_i).
  double peak_component(int i) const;
  /// Peak Euclidean norm ||u(t)|| over one cycle (sampled).
  double peak_norm() const;

  /// Verifies period > 0 and peak components within saturation.
  void validate(double saturation) const;

  /// Same program started t0 seconds later.
  GaitProgram phase_shifted(double t0) const;
};

Control control_at(const GaitProgram& gait, double t);

/// Negates all coefficients: control_at(mirror(g), t) == -control_at(g, t).
GaitProgram mirror(const GaitProgram& gait);

/// The five stock gaits (forward, backward, left, right, turn), calibrated
/// against the default chain parameters for 3 cm of forward travel per
/// 6 s cycle. backward and right are exact mirrors.
std::map<std::string, GaitProgram> gait_library();

}  // namespace salp
