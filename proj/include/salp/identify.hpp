#pragma once

#include <vector>

#include "salp/chain.hpp"
#include "salp/sim.hpp"

namespace salp {

/// One regression sample: shape, configuration velocity, control.
struct DragSample {
  Shape shape;
  Vec5 qdot;
  Vec3 u;
};

struct IdentifyOptions {
  int restarts = 10;
  int max_iterations = 100;
  uint64_t seed = 0;
  /// Known axial drag of unit 1 fixing the overall scale (kinematic data
  /// determines drag only up to a common factor). Zero means "take it
  /// from the geometry argument".
  double axial_gauge = 0.0;
};

struct IdentifyResult {
  ChainParams params;
  double objective = 0.0;
  double regressor_condition = 0.0;
  std::vector<std::string> warnings;
};

/// Fits the drag parameters minimizing sum ||Lambda(r) qdot - Lambda_u(r) u||^2
/// with each unit drag parameterized as L L^T and joint drags as squares,
/// by Gauss-Newton with random restarts. Deterministic per seed.
IdentifyResult identify_drag_samples(const std::vector<DragSample>& samples,
                                     const ChainParams& geometry,
                                     const IdentifyOptions& options = {});

/// Trajectory front end: derives configuration velocities by groupwise
/// central differences of the ground truth, then runs the sample fit.
IdentifyResult identify_drag(const std::vector<Trajectory>& trajectories,
                             const ChainParams& geometry,
                             const IdentifyOptions& options = {});

}  // namespace salp
