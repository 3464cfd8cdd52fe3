#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "salp/gait.hpp"
#include "salp/gp.hpp"
#include "salp/io.hpp"
#include "salp/rng.hpp"
#include "salp/sim.hpp"

using namespace salp;

namespace {
const std::string kTmp = "/tmp/salp_io_test";
struct TmpDir {
  TmpDir() {
    std::filesystem::remove_all(kTmp);
    std::filesystem::create_directories(kTmp);
  }
} tmp_dir;
}  // namespace

TEST_CASE("chain params JSON round trip") {
  ChainParams p = ChainParams::default_params();
  p.imu_offsets[1] = Pose(0.02, -0.01, 0.3);
  p.unit_drag[2] = DragMatrix([] {
    Mat3 m;
    m << 2.0, 0.1, 0.05, 0.1, 6.0, -0.02, 0.05, -0.02, 0.5;
    return m;
  }());
  const std::string text = chain_params_to_json(p);
  const ChainParams q = chain_params_from_json(text);
  CHECK(q.beta[1] == p.beta[1]);
  CHECK(q.unit_drag[2].m(0, 1) == p.unit_drag[2].m(0, 1));
  CHECK(q.imu_offsets[1].theta == p.imu_offsets[1].theta);
  CHECK(q.joint_limit == p.joint_limit);
}

TEST_CASE("degrees accepted with an explicit unit tag") {
  const std::string text = R"({
    "n_units": 3,
    "link_length_m": 0.3,
    "beta": {"unit": "deg", "values": [-57, -130, -57]},
    "unit_drag": [{"cxx": 2, "cyy": 6, "ctt": 0.5},
                  {"cxx": 2, "cyy": 6, "ctt": 0.5},
                  {"cxx": 2, "cyy": 6, "ctt": 0.5}],
    "joint_drag": [0.2, 0.2],
    "joint_offsets_m": [0.15, 0.15],
    "imu_offsets": [{}, {}, {"theta": {"unit": "deg", "value": 90}}],
    "joint_limit": {"unit": "deg", "value": 90}
  })";
  const ChainParams p = chain_params_from_json(text);
  CHECK(p.beta[0] == doctest::Approx(-57.0 * M_PI / 180.0));
  CHECK(p.imu_offsets[2].theta == doctest::Approx(M_PI / 2));
  CHECK(p.joint_limit == doctest::Approx(M_PI / 2));

  CHECK_THROWS_AS(chain_params_from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(chain_params_from_json("{}"), ConfigError);
}

TEST_CASE("gait and noise configs round trip") {
  const auto lib = gait_library();
  const auto lib2 = gaits_from_json(gaits_to_json(lib));
  for (const auto& [name, g] : lib) {
    const auto& h = lib2.at(name);
    for (size_t i = 0; i < 3; ++i) {
      CHECK(g.a0[i] == h.a0[i]);
      CHECK(g.a1[i] == h.a1[i]);
      CHECK(g.b1[i] == h.b1[i]);
    }
  }

  const NoiseModel n = NoiseModel::default_model();
  const NoiseModel n2 = noise_from_json(noise_to_json(n));
  for (size_t i = 0; i < 5; ++i) {
    CHECK(n2.process[i].w == n.process[i].w);
    CHECK(n2.process[i].mu1 == n.process[i].mu1);
    CHECK(n2.process[i].sigma1 == n.process[i].sigma1);
  }
}

TEST_CASE("trajectory CSV round trip is bit exact") {
  const ChainParams p = ChainParams::default_params();
  const Trajectory traj = simulate(p, gait_library().at("forward"), 8.0, 5.0,
                                   NoiseModel::default_model(), 99);
  const std::string path = kTmp + "/traj.csv";
  save_trajectory(traj, path, "deadbeef");
  const Trajectory back = load_trajectory(path);

  REQUIRE(back.size() == traj.size());
  CHECK(back.rate_hz == traj.rate_hz);
  CHECK(back.seed == traj.seed);
  for (size_t k = 0; k < traj.size(); ++k) {
    CHECK(back.timestamps[k] == traj.timestamps[k]);
    CHECK(back.truth[k].pose.x == traj.truth[k].pose.x);
    CHECK(back.truth[k].pose.theta == traj.truth[k].pose.theta);
    CHECK(back.truth[k].shape.alpha1 == traj.truth[k].shape.alpha1);
    CHECK(back.controls[k].u == traj.controls[k].u);
    CHECK(back.gyro[k] == traj.gyro[k]);
  }
  // saving the loaded trajectory reproduces the file byte for byte
  save_trajectory(back, kTmp + "/traj2.csv", "deadbeef");
  CHECK(read_text_file(path) == read_text_file(kTmp + "/traj2.csv"));
}

TEST_CASE("dataset CSV round trip") {
  const ChainParams p = ChainParams::default_params();
  const Trajectory traj = simulate(p, gait_library().at("left"), 10.0, 5.0,
                                   NoiseModel::default_model(), 7);
  auto [df, dh] = build_residual_datasets(traj, p, 5.0);
  const std::string path = kTmp + "/df.csv";
  save_dataset(df, path, "cafe");
  const ResidualDataset back = load_dataset(path);
  REQUIRE(back.size() == df.size());
  CHECK(back.kind == ResidualKind::process);
  CHECK(back.rate_hz == df.rate_hz);
  for (size_t k = 0; k < df.size(); ++k) {
    CHECK(back.inputs[k] == df.inputs[k]);
    CHECK(back.targets[k] == df.targets[k]);
  }
}

TEST_CASE("GP artifact: loaded predictions match saved-session predictions") {
  Rng rng(3);
  Eigen::MatrixXd x(80, 5);
  Eigen::VectorXd y(80);
  for (Eigen::Index i = 0; i < 80; ++i) {
    for (Eigen::Index k = 0; k < 5; ++k) x(i, k) = rng.uniform(-1, 1);
    y[i] = std::sin(x(i, 0)) + 0.1 * rng.normal();
  }
  EnhancedGpModels models;
  for (int i = 0; i < 5; ++i)
    models.process.push_back(fit(x, y, {}, static_cast<uint64_t>(i)));
  for (int i = 0; i < 3; ++i)
    models.measurement.push_back(fit(x, y, {}, static_cast<uint64_t>(10 + i)));

  const std::string path = kTmp + "/gp.json";
  save_gp_set(models, path, "feed");
  std::string hash;
  const EnhancedGpModels back = load_gp_set(path, &hash);
  CHECK(hash == "feed");

  for (int q = 0; q < 20; ++q) {
    Eigen::VectorXd query(5);
    for (int k = 0; k < 5; ++k) query[k] = rng.uniform(-1, 1);
    for (size_t i = 0; i < 5; ++i) {
      const auto [m0, v0] = models.process[i].predict(query);
      const auto [m1, v1] = back.process[i].predict(query);
      CHECK(std::abs(m0 - m1) <= 1e-12 * std::max(1.0, std::abs(m0)));
      CHECK(std::abs(v0 - v1) <= 1e-12 * std::max(1.0, v0));
    }
  }
}

TEST_CASE("report round trip") {
  EvalReport r;
  r.rmse << 1e-3, 2e-3, 3e-3, 4e-3, 5e-3;
  r.sigma3_violation_fraction << 0.0, 0.01, 0.0, 0.02, 0.0;
  r.position_drift_m_per_min = 0.0042;
  r.heading_drift_deg_per_min = 0.31;
  r.nees_mean = 4.9;
  r.test_hash = "beefcafe";
  const std::string path = kTmp + "/report.json";
  save_report(r, path);
  const EvalReport back = load_report(path);
  CHECK(back.rmse == r.rmse);
  CHECK(back.nees_mean == r.nees_mean);
  CHECK(back.test_hash == r.test_hash);
}

TEST_CASE("fnv hash is stable and content sensitive") {
  CHECK(fnv1a_hex("") == fnv1a_hex(""));
  CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
  CHECK(fnv1a_hex("abc").size() == 16);
}

TEST_CASE("missing files raise IO errors") {
  CHECK_THROWS_AS(read_text_file("/nonexistent/nope.txt"), IoError);
  CHECK_THROWS_AS(load_trajectory("/nonexistent/traj.csv"), IoError);
  CHECK_THROWS_AS(load_chain_params("/nonexistent/params.json"), ConfigError);
}
