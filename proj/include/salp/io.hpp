#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "salp/chain.hpp"
#include "salp/gait.hpp"
#include "salp/metrics.hpp"
#include "salp/noise.hpp"
#include "salp/sim.hpp"
#include "salp/ukf.hpp"

namespace salp {

/// FNV-1a over a byte string, rendered as fixed-width hex.
std::string fnv1a_hex(const std::string& bytes);
std::string hash_file(const std::string& path);

// --- structured-text configs (JSON; angles accept {"unit":"deg"|"rad"}) ---

std::string chain_params_to_json(const ChainParams& p);
ChainParams chain_params_from_json(const std::string& text);
ChainParams load_chain_params(const std::string& path);
void save_chain_params(const ChainParams& p, const std::string& path);

std::string gaits_to_json(const std::map<std::string, GaitProgram>& gaits);
std::map<std::string, GaitProgram> gaits_from_json(const std::string& text);

std::string noise_to_json(const NoiseModel& n);
NoiseModel noise_from_json(const std::string& text);
NoiseModel load_noise(const std::string& path);

// --- trajectories and residual datasets (17-significant-digit CSV) ---

void save_trajectory(const Trajectory& traj, const std::string& csv_path,
                     const std::string& params_hash);
Trajectory load_trajectory(const std::string& csv_path);

void save_dataset(const ResidualDataset& ds, const std::string& csv_path,
                  const std::string& source_hash);
ResidualDataset load_dataset(const std::string& csv_path);

// --- GP artifacts (versioned JSON; factorization recomputed on load) ---

std::string gp_set_to_json(const EnhancedGpModels& models,
                           const std::string& dataset_hash,
                           const std::string& params_hash = "");
EnhancedGpModels gp_set_from_json(const std::string& text,
                                  std::string* dataset_hash = nullptr,
                                  std::string* params_hash = nullptr);
void save_gp_set(const EnhancedGpModels& models, const std::string& path,
                 const std::string& dataset_hash,
                 const std::string& params_hash = "");
EnhancedGpModels load_gp_set(const std::string& path,
                             std::string* dataset_hash = nullptr,
                             std::string* params_hash = nullptr);

// --- filter outputs ---

/// Provenance recorded next to an estimate series.
struct EstimateMeta {
  std::string gp_artifact_hash;
  std::string trajectory_hash;
  Vec5 init_mean = Vec5::Zero();
  Vec5 init_sigma = Vec5::Zero();
  UtParams ut;
};

void save_estimates(const RunResult& run, const std::string& csv_path,
                    const EstimateMeta* meta = nullptr);
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace salp
