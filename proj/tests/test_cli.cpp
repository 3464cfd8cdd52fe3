#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "salp/io.hpp"
#include "salp/pipeline.hpp"
#include "salp/rng.hpp"

using namespace salp;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SALP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

const std::string kTmp = "/tmp/salp_cli_test";
struct TmpDir {
  TmpDir() {
    fs::remove_all(kTmp);
    fs::create_directories(kTmp);
  }
} tmp_dir;

}  // namespace

TEST_CASE("seed derivation is deterministic and label sensitive") {
  CHECK(derive_seed(1, "train/forward") == derive_seed(1, "train/forward"));
  CHECK(derive_seed(1, "train/forward") != derive_seed(1, "train/left"));
  CHECK(derive_seed(1, "train/forward") != derive_seed(2, "train/forward"));
}

TEST_CASE("run config validation catches inconsistent rates") {
  RunConfig cfg;
  cfg.sim_rate_hz = 7.0;
  cfg.dataset_rate_hz = 5.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.sim_rate_hz = 25.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("run config file loading resolves relative paths") {
  const std::string dir = kTmp + "/cfg";
  fs::create_directories(dir);
  save_chain_params(ChainParams::default_params(), dir + "/chain.json");
  write_text_file(dir + "/noise.json", noise_to_json(NoiseModel::default_model()));
  write_text_file(dir + "/run.json", R"({
    "chain_params": "chain.json",
    "noise_model": "noise.json",
    "seed": 42,
    "test": {"duration_s": 20.0},
    "init_sigma": {"position_m": 0.01,
                   "heading": {"unit": "deg", "value": 5},
                   "joints": {"unit": "deg", "value": 5}}
  })");
  const RunConfig cfg = load_run_config(dir + "/run.json");
  CHECK(cfg.seed == 42);
  CHECK(cfg.test_duration_s == 20.0);
  CHECK(cfg.init_sigma_heading_rad == doctest::Approx(5.0 * M_PI / 180.0));

  write_text_file(dir + "/bad.json", R"({"chain_params": "missing.json"})");
  CHECK_THROWS_AS(load_run_config(dir + "/bad.json"), ConfigError);
}

TEST_CASE("cli: invalid gait name exits nonzero and writes nothing") {
  const std::string out = kTmp + "/badgait";
  const int code = run_cli("--out " + out + " simulate --gait nosuch --duration 5");
  CHECK(code == 2);  // config error
  CHECK(!fs::exists(out + "/sim_nosuch.csv"));
}

TEST_CASE("cli: unknown scenario is a usage error") {
  const int code = run_cli("--out " + kTmp + "/scen repro --scenario bogus");
  CHECK(code == 2);
}

TEST_CASE("cli: simulate writes the trajectory with sidecar") {
  const std::string out = kTmp + "/sim";
  const int code =
      run_cli("--out " + out + " --seed 9 simulate --gait forward --duration 6");
  CHECK(code == 0);
  const std::string path = out + "/sim_forward.csv";
  REQUIRE(fs::exists(path));
  REQUIRE(fs::exists(path + ".meta.json"));
  const Trajectory traj = load_trajectory(path);
  CHECK(traj.size() == 31);  // 6 s at 5 Hz plus the endpoint
  CHECK(traj.gait_label == "forward");
}

TEST_CASE("cli: simulate twice with one seed is byte identical") {
  const std::string out_a = kTmp + "/det_a";
  const std::string out_b = kTmp + "/det_b";
  CHECK(run_cli("--out " + out_a + " --seed 5 simulate --gait left --duration 10") == 0);
  CHECK(run_cli("--out " + out_b + " --seed 5 simulate --gait left --duration 10") == 0);
  CHECK(read_text_file(out_a + "/sim_left.csv") == read_text_file(out_b + "/sim_left.csv"));
}

TEST_CASE("cli: simulate all gaits writes five files") {
  const std::string out = kTmp + "/allgaits";
  CHECK(run_cli("--out " + out + " simulate --gait all --duration 6") == 0);
  int count = 0;
  for (const char* g : {"forward", "backward", "left", "right", "turn"})
    if (fs::exists(out + "/sim_" + std::string(g) + ".csv")) ++count;
  CHECK(count == 5);
}

TEST_CASE("cli: train refuses undersized datasets") {
  const std::string out = kTmp + "/small";
  REQUIRE(run_cli("--out " + out + " simulate --gait forward --duration 10") == 0);
  const int code = run_cli("--out " + out + " train --trajectory " + out +
                           "/sim_forward.csv");
  CHECK(code == 3);  // data error: fewer than 100 points
}

TEST_CASE("stage_simulate honors the configured gait set") {
  RunConfig cfg;
  cfg.out_dir = kTmp + "/stage";
  CHECK_THROWS_AS(stage_simulate(cfg, "sideways", 5.0, cfg.out_dir, "x"), ConfigError);
}
