#pragma once

#include <string>
#include <vector>

#include "salp/types.hpp"
#include "salp/ukf.hpp"

namespace salp {

/// Per-run evaluation statistics.
struct EvalReport {
  Eigen::Matrix<double, 5, 1> rmse = Vec5::Zero();
  double position_drift_m_per_min = 0.0;  // LS slope of ||pos error||
  double heading_drift_deg_per_min = 0.0; // LS slope of |theta error|
  Eigen::Matrix<double, 5, 1> sigma3_violation_fraction = Vec5::Zero();
  double nees_mean = 0.0;
  double runtime_seconds = 0.0;
  std::string test_hash;  // identifies the test trajectory
};

/// Errors (angle-wrapped), strict 3-sigma tests, and NEES against the
/// aligned truth series.
EvalReport evaluate(const std::vector<double>& t,
                    const std::vector<Vec5>& estimates,
                    const std::vector<Mat5>& covariances,
                    const std::vector<Vec5>& truth);

/// Same, taking the error series directly (as produced by run()).
EvalReport evaluate_errors(const std::vector<double>& t,
                           const std::vector<Vec5>& errors,
                           const std::vector<Mat5>& covariances);

struct FilterComparison {
  EvalReport a, b;
  Vec5 rmse_ratio = Vec5::Zero();             // b over a
  double position_drift_ratio = 0.0;
  Vec5 violation_ratio = Vec5::Zero();
  std::string to_text() const;
};

/// Side-by-side report; requires both runs to come from the same test
/// trajectory.
FilterComparison compare_filters(const EvalReport& a, const EvalReport& b);

/// One SVG per state (error with the +/-3 sigma band) plus a CSV of the
/// plotted series. Deterministic bytes for identical inputs.
std::vector<std::string> emit_plots(const std::vector<double>& t,
                                    const std::vector<Vec5>& errors,
                                    const std::vector<Mat5>& covariances,
                                    const std::string& out_dir);

}  // namespace salp
