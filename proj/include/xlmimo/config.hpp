#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xlmimo/channel.hpp"
#include "xlmimo/gnn_prior.hpp"
#include "xlmimo/gnn_train.hpp"
#include "xlmimo/refine.hpp"
#include "xlmimo/sbl.hpp"

namespace xlmimo {

inline constexpr const char* kStdSbl = "std-sbl";
inline constexpr const char* kSblGnn = "sbl-gnn";

/// Everything an experiment needs. Defaults are the desk-scale setup
/// (64 antennas in 4 subarrays, 8 subcarriers, 8 pilot slots).
struct ExperimentConfig {
  SystemConfig system;
  Eigen::Index g_paths = 4;
  PathLaw path_law;

  std::vector<std::string> estimators{kStdSbl, kSblGnn};
  std::vector<bool> refinement{false, true};
  bool centralized = true;

  SblOptions std_sbl;  // 200 iterations, early stop at 1e-6
  UnrollOptions gnn;   // T = 5, L = 3, full graph
  GnnDims gnn_dims;
  std::string checkpoint;

  MarkovPrior markov = MarkovPrior::from_sparsity(0.1, 0.1);
  RefineOptions refine;

  std::vector<double> snr_db{5.0};
  std::vector<Eigen::Index> p_slots{8};
  int trials = 10;

  TrainConfig train;
  int train_samples = 512;
  double train_snr_min = -5.0;
  double train_snr_max = 15.0;

  std::uint64_t seed = 1;
  bool parallel_lpus = true;

  /// FNV-1a of the canonical text rendering; stamped into dataset headers.
  std::uint64_t hash() const;
  /// Canonical `[section] key = value` rendering accepted by parse_config.
  std::string to_text() const;
  void validate() const;
};

/// Parses the sectioned key = value format. Unknown sections or keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace xlmimo
