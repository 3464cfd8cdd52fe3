#include "salp/metrics.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "salp/se2.hpp"

namespace salp {

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return 0.0;
  return (n * sxy - sx * sy) / den;
}

}  // namespace

EvalReport evaluate_errors(const std::vector<double>& t,
                           const std::vector<Vec5>& errors,
                           const std::vector<Mat5>& covariances) {
  const size_t n = t.size();
  if (errors.size() != n || covariances.size() != n)
    throw DataError("evaluate: series lengths misaligned");
  if (n == 0) throw DataError("evaluate: empty series");

  EvalReport rep;
  Vec5 sq = Vec5::Zero();
  Eigen::Matrix<double, 5, 1> violations = Vec5::Zero();
  std::vector<double> t_min(n), pos_err(n), heading_err(n);
  double nees_sum = 0.0;

  for (size_t k = 0; k < n; ++k) {
    Vec5 e = errors[k];
    e[2] = wrap_angle(e[2]);
    e[3] = wrap_angle(e[3]);
    e[4] = wrap_angle(e[4]);
    sq += e.cwiseProduct(e);
    for (int i = 0; i < 5; ++i) {
      const double sigma = std::sqrt(std::max(0.0, covariances[k](i, i)));
      if (std::abs(e[i]) > 3.0 * sigma) violations[i] += 1.0;
    }
    nees_sum += e.dot(covariances[k].ldlt().solve(e));
    t_min[k] = t[k] / 60.0;
    pos_err[k] = std::hypot(e[0], e[1]);
    heading_err[k] = std::abs(e[2]) * 180.0 / M_PI;
  }

  rep.rmse = (sq / static_cast<double>(n)).cwiseSqrt();
  rep.sigma3_violation_fraction = violations / static_cast<double>(n);
  rep.nees_mean = nees_sum / static_cast<double>(n);
  rep.position_drift_m_per_min = ls_slope(t_min, pos_err);
  rep.heading_drift_deg_per_min = ls_slope(t_min, heading_err);
  return rep;
}

EvalReport evaluate(const std::vector<double>& t,
                    const std::vector<Vec5>& estimates,
                    const std::vector<Mat5>& covariances,
                    const std::vector<Vec5>& truth) {
  if (estimates.size() != t.size() || truth.size() != t.size())
    throw DataError("evaluate: series lengths misaligned");
  std::vector<Vec5> errors(t.size());
  for (size_t k = 0; k < t.size(); ++k) errors[k] = estimates[k] - truth[k];
  return evaluate_errors(t, errors, covariances);
}

FilterComparison compare_filters(const EvalReport& a, const EvalReport& b) {
  if (a.test_hash != b.test_hash)
    throw DataError("compare_filters: reports from different test trajectories");
  FilterComparison c;
  c.a = a;
  c.b = b;
  for (int i = 0; i < 5; ++i) {
    c.rmse_ratio[i] = a.rmse[i] != 0.0 ? b.rmse[i] / a.rmse[i]
                                       : (b.rmse[i] == 0.0 ? 1.0 : INFINITY);
    const double va = a.sigma3_violation_fraction[i];
    const double vb = b.sigma3_violation_fraction[i];
    c.violation_ratio[i] = va != 0.0 ? vb / va : (vb == 0.0 ? 1.0 : INFINITY);
  }
  c.position_drift_ratio =
      a.position_drift_m_per_min != 0.0
          ? b.position_drift_m_per_min / a.position_drift_m_per_min
          : (b.position_drift_m_per_min == 0.0 ? 1.0 : INFINITY);
  return c;
}

std::string FilterComparison::to_text() const {
  static const char* kState[5] = {"x", "y", "theta", "alpha1", "alpha2"};
  char buf[256];
  std::string out;
  out += "state  rmse_a      rmse_b      ratio     viol_a  viol_b\n";
  for (int i = 0; i < 5; ++i) {
    std::snprintf(buf, sizeof buf, "%-6s %-11.5g %-11.5g %-9.4g %-7.4g %-7.4g\n",
                  kState[i], a.rmse[i], b.rmse[i], rmse_ratio[i],
                  a.sigma3_violation_fraction[i], b.sigma3_violation_fraction[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "position drift (m/min): %.5g vs %.5g (ratio %.4g)\n",
                a.position_drift_m_per_min, b.position_drift_m_per_min,
                position_drift_ratio);
  out += buf;
  std::snprintf(buf, sizeof buf, "NEES mean: %.5g vs %.5g\n", a.nees_mean,
                b.nees_mean);
  out += buf;
  return out;
}

namespace {

void append_num(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  s += buf;
}

std::string render_svg(const std::vector<double>& t,
                       const std::vector<double>& err,
                       const std::vector<double>& sigma3,
                       const std::string& label) {
  const double width = 720.0, height = 240.0, margin = 40.0;
  double t_lo = t.front(), t_hi = t.back();
  if (t_hi <= t_lo) t_hi = t_lo + 1.0;
  double v_hi = 1e-12;
  for (size_t k = 0; k < t.size(); ++k)
    v_hi = std::max({v_hi, std::abs(err[k]), sigma3[k]});
  v_hi *= 1.1;

  auto px = [&](double tv) {
    return margin + (tv - t_lo) / (t_hi - t_lo) * (width - 2 * margin);
  };
  auto py = [&](double vv) {
    return height / 2.0 - vv / v_hi * (height / 2.0 - margin / 2.0);
  };

  auto polyline = [&](const std::vector<double>& vals, double sign,
                      const char* color) {
    std::string p = "<polyline fill=\"none\" stroke=\"";
    p += color;
    p += "\" stroke-width=\"1\" points=\"";
    for (size_t k = 0; k < t.size(); ++k) {
      append_num(p, px(t[k]));
      p += ",";
      append_num(p, py(sign * vals[k]));
      p += " ";
    }
    p += "\"/>\n";
    return p;
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" "
                    "height=\"240\" viewBox=\"0 0 720 240\">\n";
  svg += "<rect width=\"720\" height=\"240\" fill=\"white\"/>\n";
  svg += "<line x1=\"40\" y1=\"120\" x2=\"680\" y2=\"120\" stroke=\"#cccccc\"/>\n";
  svg += polyline(sigma3, 1.0, "#d62728");
  svg += polyline(sigma3, -1.0, "#d62728");
  svg += polyline(err, 1.0, "#1f77b4");
  svg += "<text x=\"40\" y=\"20\" font-family=\"monospace\" font-size=\"13\">";
  svg += label + " error with 3-sigma bounds</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace

std::vector<std::string> emit_plots(const std::vector<double>& t,
                                    const std::vector<Vec5>& errors,
                                    const std::vector<Mat5>& covariances,
                                    const std::string& out_dir) {
  if (t.empty() || errors.size() != t.size() || covariances.size() != t.size())
    throw DataError("emit_plots: empty or misaligned series");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw IoError("emit_plots: cannot create output directory " + out_dir);

  static const char* kState[5] = {"x", "y", "theta", "alpha1", "alpha2"};
  std::vector<std::string> files;

  // Render everything first so an IO failure cannot leave partial output.
  std::vector<std::pair<std::string, std::string>> pending;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> e(t.size()), s3(t.size());
    for (size_t k = 0; k < t.size(); ++k) {
      e[k] = errors[k][i];
      s3[k] = 3.0 * std::sqrt(std::max(0.0, covariances[k](i, i)));
    }
    pending.emplace_back(std::string("error_") + kState[i] + ".svg",
                         render_svg(t, e, s3, kState[i]));
  }

  std::string csv = "t,err_x,err_y,err_theta,err_alpha1,err_alpha2,"
                    "sigma3_x,sigma3_y,sigma3_theta,sigma3_alpha1,sigma3_alpha2\n";
  char buf[64];
  for (size_t k = 0; k < t.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", t[k]);
    csv += buf;
    for (int i = 0; i < 5; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", errors[k][i]);
      csv += buf;
    }
    for (int i = 0; i < 5; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g",
                    3.0 * std::sqrt(std::max(0.0, covariances[k](i, i))));
      csv += buf;
    }
    csv += "\n";
  }
  pending.emplace_back("error_series.csv", csv);

  for (auto& [name, content] : pending) {
    const std::string path = (fs::path(out_dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("emit_plots: cannot write " + path);
    f << content;
    files.push_back(path);
  }
  return files;
}

}  // namespace salp
