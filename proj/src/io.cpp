#include "salp/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace salp {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str()) throw DataError("bad numeric token: " + tok);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Angle field: plain number (radians) or {"unit": "deg"|"rad", "value"/"values": ...}.
double angle_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string unit = j.at("unit").get<std::string>();
  const double v = j.at("value").get<double>();
  if (unit == "deg") return v * M_PI / 180.0;
  if (unit == "rad") return v;
  throw ConfigError("unknown angle unit: " + unit);
}

std::vector<double> angles_from_json(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  const std::string unit = j.at("unit").get<std::string>();
  auto vals = j.at("values").get<std::vector<double>>();
  if (unit == "deg")
    for (auto& v : vals) v *= M_PI / 180.0;
  else if (unit != "rad")
    throw ConfigError("unknown angle unit: " + unit);
  return vals;
}

json sidecar_path_load(const std::string& csv_path) {
  const std::string meta = csv_path + ".meta.json";
  if (!std::filesystem::exists(meta)) return json::object();
  return json::parse(read_text_file(meta));
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_file(const std::string& path) {
  return fnv1a_hex(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << content;
  if (!f) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------- params

std::string chain_params_to_json(const ChainParams& p) {
  json j;
  j["schema"] = "salp.chain_params/1";
  j["n_units"] = p.n_units;
  j["link_length_m"] = p.link_length;
  j["beta"] = {{"unit", "rad"}, {"values", p.beta}};
  json drags = json::array();
  for (const auto& d : p.unit_drag) {
    drags.push_back({{"cxx", d.m(0, 0)},
                     {"cxy", d.m(0, 1)},
                     {"cxt", d.m(0, 2)},
                     {"cyy", d.m(1, 1)},
                     {"cyt", d.m(1, 2)},
                     {"ctt", d.m(2, 2)}});
  }
  j["unit_drag"] = drags;
  j["joint_drag"] = p.joint_drag;
  j["joint_offsets_m"] = p.joint_offsets;
  json imus = json::array();
  for (const auto& o : p.imu_offsets)
    imus.push_back({{"x_m", o.x}, {"y_m", o.y}, {"theta", o.theta}});
  j["imu_offsets"] = imus;
  j["joint_limit"] = {{"unit", "rad"}, {"value", p.joint_limit}};
  j["control_saturation_mps"] = p.control_saturation;
  return j.dump(2) + "\n";
}

ChainParams chain_params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("chain params parse error: ") + e.what());
  }
  try {
    ChainParams p;
    p.n_units = j.at("n_units").get<int>();
    p.link_length = j.at("link_length_m").get<double>();
    p.beta = angles_from_json(j.at("beta"));
    p.unit_drag.clear();
    for (const auto& d : j.at("unit_drag")) {
      Mat3 m;
      const double cxx = d.at("cxx").get<double>();
      const double cxy = d.value("cxy", 0.0);
      const double cxt = d.value("cxt", 0.0);
      const double cyy = d.at("cyy").get<double>();
      const double cyt = d.value("cyt", 0.0);
      const double ctt = d.at("ctt").get<double>();
      m << cxx, cxy, cxt, cxy, cyy, cyt, cxt, cyt, ctt;
      p.unit_drag.emplace_back(m);
    }
    p.joint_drag = j.at("joint_drag").get<std::vector<double>>();
    p.joint_offsets = j.at("joint_offsets_m").get<std::vector<double>>();
    p.imu_offsets.clear();
    for (const auto& o : j.at("imu_offsets"))
      p.imu_offsets.emplace_back(o.value("x_m", 0.0), o.value("y_m", 0.0),
                                 o.contains("theta") ? angle_from_json(o.at("theta")) : 0.0);
    if (j.contains("joint_limit")) p.joint_limit = angle_from_json(j.at("joint_limit"));
    if (j.contains("control_saturation_mps"))
      p.control_saturation = j.at("control_saturation_mps").get<double>();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("chain params schema error: ") + e.what());
  }
}

ChainParams load_chain_params(const std::string& path) {
  try {
    return chain_params_from_json(read_text_file(path));
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void save_chain_params(const ChainParams& p, const std::string& path) {
  write_text_file(path, chain_params_to_json(p));
}

// ----------------------------------------------------------------- gaits

std::string gaits_to_json(const std::map<std::string, GaitProgram>& gaits) {
  json j;
  j["schema"] = "salp.gaits/1";
  json entries;
  for (const auto& [name, g] : gaits) {
    entries[name] = {{"period_s", g.period},
                     {"a0", g.a0},
                     {"a1", g.a1},
                     {"b1", g.b1}};
  }
  j["gaits"] = entries;
  return j.dump(2) + "\n";
}

std::map<std::string, GaitProgram> gaits_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("gait file parse error: ") + e.what());
  }
  std::map<std::string, GaitProgram> out;
  try {
    for (const auto& [name, g] : j.at("gaits").items()) {
      GaitProgram gp;
      gp.period = g.at("period_s").get<double>();
      gp.a0 = g.at("a0").get<std::array<double, 3>>();
      gp.a1 = g.at("a1").get<std::array<double, 3>>();
      gp.b1 = g.at("b1").get<std::array<double, 3>>();
      out[name] = gp;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("gait schema error: ") + e.what());
  }
  return out;
}

// ----------------------------------------------------------------- noise

namespace {

json mixture_to_json(const Mixture& m) {
  return {{"w", m.w}, {"mu1", m.mu1}, {"sigma1", m.sigma1},
          {"mu2", m.mu2}, {"sigma2", m.sigma2}};
}

Mixture mixture_from_json(const json& j) {
  Mixture m;
  m.w = j.at("w").get<double>();
  m.mu1 = j.at("mu1").get<double>();
  m.sigma1 = j.at("sigma1").get<double>();
  m.mu2 = j.at("mu2").get<double>();
  m.sigma2 = j.at("sigma2").get<double>();
  return m;
}

}  // namespace

std::string noise_to_json(const NoiseModel& n) {
  json j;
  j["schema"] = "salp.noise/1";
  j["rate_hz"] = n.rate_hz;
  json pr = json::array(), me = json::array();
  for (const auto& m : n.process) pr.push_back(mixture_to_json(m));
  for (const auto& m : n.measurement) me.push_back(mixture_to_json(m));
  j["process"] = pr;
  j["measurement"] = me;
  return j.dump(2) + "\n";
}

NoiseModel noise_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("noise file parse error: ") + e.what());
  }
  try {
    NoiseModel n;
    n.rate_hz = j.at("rate_hz").get<double>();
    const auto& pr = j.at("process");
    const auto& me = j.at("measurement");
    if (pr.size() != 5 || me.size() != 3)
      throw ConfigError("noise model needs 5 process and 3 measurement channels");
    for (size_t i = 0; i < 5; ++i) n.process[i] = mixture_from_json(pr[i]);
    for (size_t i = 0; i < 3; ++i) n.measurement[i] = mixture_from_json(me[i]);
    n.validate();
    return n;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("noise schema error: ") + e.what());
  }
}

NoiseModel load_noise(const std::string& path) {
  try {
    return noise_from_json(read_text_file(path));
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ------------------------------------------------------------ trajectory

void save_trajectory(const Trajectory& traj, const std::string& csv_path,
                     const std::string& params_hash) {
  traj.validate();
  std::string csv =
      "t,x,y,theta,alpha1,alpha2,u1,u2,u3,gyro1,gyro2,gyro3\n";
  for (size_t k = 0; k < traj.size(); ++k) {
    csv += fmt17(traj.timestamps[k]);
    const Config& c = traj.truth[k];
    for (double v : {c.pose.x, c.pose.y, c.pose.theta, c.shape.alpha1,
                     c.shape.alpha2, traj.controls[k].u[0], traj.controls[k].u[1],
                     traj.controls[k].u[2], traj.gyro[k][0], traj.gyro[k][1],
                     traj.gyro[k][2]}) {
      csv += ",";
      csv += fmt17(v);
    }
    csv += "\n";
  }
  write_text_file(csv_path, csv);

  json meta;
  meta["schema"] = "salp.trajectory_meta/1";
  meta["rate_hz"] = traj.rate_hz;
  meta["seed"] = traj.seed;
  meta["gait"] = traj.gait_label;
  meta["rows"] = traj.size();
  meta["params_hash"] = params_hash;
  meta["data_hash"] = fnv1a_hex(csv);
  write_text_file(csv_path + ".meta.json", meta.dump(2) + "\n");
}

Trajectory load_trajectory(const std::string& csv_path) {
  std::istringstream in(read_text_file(csv_path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty trajectory file " + csv_path);

  Trajectory traj;
  // joint limits unknown at load time: accept anything representable
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto toks = split_csv_line(line);
    if (toks.size() != 12)
      throw DataError("trajectory row needs 12 columns in " + csv_path);
    double v[12];
    for (size_t i = 0; i < 12; ++i) v[i] = parse_double(toks[i]);
    traj.timestamps.push_back(v[0]);
    Config c;
    c.pose = Pose(v[1], v[2], v[3]);
    c.shape = Shape(v[4], v[5], M_PI);
    traj.truth.push_back(c);
    traj.controls.push_back(Control(v[6], v[7], v[8]));
    traj.gyro.push_back(Vec3(v[9], v[10], v[11]));
  }
  if (traj.size() >= 2)
    traj.rate_hz = 1.0 / (traj.timestamps[1] - traj.timestamps[0]);

  const json meta = sidecar_path_load(csv_path);
  if (meta.contains("rate_hz")) traj.rate_hz = meta["rate_hz"].get<double>();
  if (meta.contains("seed")) traj.seed = meta["seed"].get<uint64_t>();
  if (meta.contains("gait")) traj.gait_label = meta["gait"].get<std::string>();
  traj.validate();
  return traj;
}

// --------------------------------------------------------------- dataset

void save_dataset(const ResidualDataset& ds, const std::string& csv_path,
                  const std::string& source_hash) {
  const size_t dim = ds.targets.empty() ? 0 : static_cast<size_t>(ds.targets[0].size());
  std::string csv = "alpha1,alpha2,u1,u2,u3";
  for (size_t i = 0; i < dim; ++i) csv += ",target" + std::to_string(i);
  csv += "\n";
  for (size_t k = 0; k < ds.size(); ++k) {
    for (int i = 0; i < 5; ++i) {
      if (i) csv += ",";
      csv += fmt17(ds.inputs[k][i]);
    }
    for (size_t i = 0; i < dim; ++i) {
      csv += ",";
      csv += fmt17(ds.targets[k][static_cast<Eigen::Index>(i)]);
    }
    csv += "\n";
  }
  write_text_file(csv_path, csv);

  json meta;
  meta["schema"] = "salp.dataset_meta/1";
  meta["kind"] = ds.kind == ResidualKind::process ? "process" : "measurement";
  meta["rate_hz"] = ds.rate_hz;
  meta["rows"] = ds.size();
  meta["source_hash"] = source_hash;
  meta["data_hash"] = fnv1a_hex(csv);
  write_text_file(csv_path + ".meta.json", meta.dump(2) + "\n");
}

ResidualDataset load_dataset(const std::string& csv_path) {
  std::istringstream in(read_text_file(csv_path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file " + csv_path);
  const auto header = split_csv_line(line);
  if (header.size() < 6) throw DataError("dataset header too short in " + csv_path);
  const size_t dim = header.size() - 5;

  ResidualDataset ds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto toks = split_csv_line(line);
    if (toks.size() != header.size())
      throw DataError("dataset row width mismatch in " + csv_path);
    Vec5 input;
    for (int i = 0; i < 5; ++i) input[i] = parse_double(toks[static_cast<size_t>(i)]);
    Eigen::VectorXd target(dim);
    for (size_t i = 0; i < dim; ++i)
      target[static_cast<Eigen::Index>(i)] = parse_double(toks[5 + i]);
    ds.inputs.push_back(input);
    ds.targets.push_back(target);
  }
  const json meta = sidecar_path_load(csv_path);
  if (meta.contains("rate_hz")) ds.rate_hz = meta["rate_hz"].get<double>();
  if (meta.contains("kind"))
    ds.kind = meta["kind"] == "process" ? ResidualKind::process
                                        : ResidualKind::measurement;
  return ds;
}

// ----------------------------------------------------------- GP artifacts

namespace {

json gp_model_to_json(const GpModel& m) {
  json j;
  j["hyper"] = {{"log_signal_variance", m.hyper().log_signal_variance},
                {"log_length_scales",
                 std::vector<double>(m.hyper().log_length_scales.data(),
                                     m.hyper().log_length_scales.data() +
                                         m.hyper().log_length_scales.size())},
                {"log_noise_variance", m.hyper().log_noise_variance}};
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.inputs().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.inputs().cols(); ++k)
      row.push_back(m.inputs()(i, k));
    rows.push_back(row);
  }
  j["inputs"] = rows;
  j["targets"] = std::vector<double>(m.targets().data(),
                                     m.targets().data() + m.targets().size());
  return j;
}

GpModel gp_model_from_json(const json& j) {
  GpHyper h;
  h.log_signal_variance = j.at("hyper").at("log_signal_variance").get<double>();
  h.log_noise_variance = j.at("hyper").at("log_noise_variance").get<double>();
  const auto ls = j.at("hyper").at("log_length_scales").get<std::vector<double>>();
  h.log_length_scales =
      Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));

  const auto& rows = j.at("inputs");
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw DataError("GP artifact has no data");
  const auto d = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k)
      x(i, k) = rows[static_cast<size_t>(i)][static_cast<size_t>(k)].get<double>();
  const auto tv = j.at("targets").get<std::vector<double>>();
  Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(tv.data(), static_cast<Eigen::Index>(tv.size()));
  return GpModel(x, y, h);
}

}  // namespace

std::string gp_set_to_json(const EnhancedGpModels& models,
                           const std::string& dataset_hash,
                           const std::string& params_hash) {
  json j;
  j["schema"] = "salp.gp_set/1";
  j["residual_frame"] = models.residual_frame;
  j["dataset_hash"] = dataset_hash;
  j["params_hash"] = params_hash;
  json pr = json::array(), me = json::array();
  for (const auto& m : models.process) pr.push_back(gp_model_to_json(m));
  for (const auto& m : models.measurement) me.push_back(gp_model_to_json(m));
  j["process"] = pr;
  j["measurement"] = me;
  return j.dump() + "\n";
}

EnhancedGpModels gp_set_from_json(const std::string& text,
                                  std::string* dataset_hash,
                                  std::string* params_hash) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("GP artifact parse error: ") + e.what());
  }
  if (j.value("schema", "") != "salp.gp_set/1")
    throw DataError("unsupported GP artifact schema");
  EnhancedGpModels out;
  out.residual_frame = j.value("residual_frame", "body");
  if (dataset_hash) *dataset_hash = j.value("dataset_hash", "");
  if (params_hash) *params_hash = j.value("params_hash", "");
  for (const auto& m : j.at("process")) out.process.push_back(gp_model_from_json(m));
  for (const auto& m : j.at("measurement"))
    out.measurement.push_back(gp_model_from_json(m));
  out.validate();
  return out;
}

void save_gp_set(const EnhancedGpModels& models, const std::string& path,
                 const std::string& dataset_hash, const std::string& params_hash) {
  write_text_file(path, gp_set_to_json(models, dataset_hash, params_hash));
}

EnhancedGpModels load_gp_set(const std::string& path, std::string* dataset_hash,
                             std::string* params_hash) {
  return gp_set_from_json(read_text_file(path), dataset_hash, params_hash);
}

// --------------------------------------------------------------- filters

void save_estimates(const RunResult& run, const std::string& csv_path,
                    const EstimateMeta* meta) {
  std::string csv = "t,m_x,m_y,m_theta,m_alpha1,m_alpha2";
  for (int i = 0; i < 5; ++i)
    for (int k = i; k < 5; ++k)
      csv += ",p" + std::to_string(i) + std::to_string(k);
  csv += ",e_x,e_y,e_theta,e_alpha1,e_alpha2\n";
  const bool have_err = !run.error.empty();
  for (size_t s = 0; s < run.t.size(); ++s) {
    csv += fmt17(run.t[s]);
    for (int i = 0; i < 5; ++i) {
      csv += ",";
      csv += fmt17(run.mean[s][i]);
    }
    for (int i = 0; i < 5; ++i)
      for (int k = i; k < 5; ++k) {
        csv += ",";
        csv += fmt17(run.covariance[s](i, k));
      }
    for (int i = 0; i < 5; ++i) {
      csv += ",";
      csv += fmt17(have_err ? run.error[s][i] : std::nan(""));
    }
    csv += "\n";
  }
  write_text_file(csv_path, csv);

  if (meta) {
    json j;
    j["schema"] = "salp.estimates_meta/1";
    j["gp_artifact_hash"] = meta->gp_artifact_hash;
    j["trajectory_hash"] = meta->trajectory_hash;
    j["init_mean"] = {meta->init_mean[0], meta->init_mean[1], meta->init_mean[2],
                      meta->init_mean[3], meta->init_mean[4]};
    j["init_sigma"] = {meta->init_sigma[0], meta->init_sigma[1],
                       meta->init_sigma[2], meta->init_sigma[3],
                       meta->init_sigma[4]};
    j["ut"] = {{"alpha", meta->ut.alpha_ut},
               {"beta", meta->ut.beta_ut},
               {"kappa", meta->ut.kappa_ut}};
    j["shape_clamps"] = run.shape_clamps;
    write_text_file(csv_path + ".meta.json", j.dump(2) + "\n");
  }
}

void save_report(const EvalReport& report, const std::string& path) {
  json j;
  j["schema"] = "salp.eval_report/1";
  j["rmse"] = {report.rmse[0], report.rmse[1], report.rmse[2], report.rmse[3],
               report.rmse[4]};
  j["position_drift_m_per_min"] = report.position_drift_m_per_min;
  j["heading_drift_deg_per_min"] = report.heading_drift_deg_per_min;
  j["sigma3_violation_fraction"] = {
      report.sigma3_violation_fraction[0], report.sigma3_violation_fraction[1],
      report.sigma3_violation_fraction[2], report.sigma3_violation_fraction[3],
      report.sigma3_violation_fraction[4]};
  j["nees_mean"] = report.nees_mean;
  j["test_hash"] = report.test_hash;
  write_text_file(path, j.dump(2) + "\n");
}

EvalReport load_report(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const std::exception& e) {
    throw DataError(std::string("report parse error: ") + e.what());
  }
  EvalReport r;
  for (int i = 0; i < 5; ++i) {
    r.rmse[i] = j.at("rmse")[static_cast<size_t>(i)].get<double>();
    r.sigma3_violation_fraction[i] =
        j.at("sigma3_violation_fraction")[static_cast<size_t>(i)].get<double>();
  }
  r.position_drift_m_per_min = j.at("position_drift_m_per_min").get<double>();
  r.heading_drift_deg_per_min = j.at("heading_drift_deg_per_min").get<double>();
  r.nees_mean = j.at("nees_mean").get<double>();
  r.test_hash = j.value("test_hash", "");
  return r;
}

}  // namespace salp
