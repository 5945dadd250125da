#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xlmimo/config.hpp"

namespace xlmimo {

/// One supervised sample for training the prior updater: a single subarray's
/// pilots together with its true local angular-delay channel.
struct TrainingInstance {
  ComplexVector x_true;  // n_sub * k_sc
  ComplexMatrix w;       // Q x n_sub
  ComplexMatrix y;       // Q x k_sc
  double zeta = 1.0;
  double snr_db = 0.0;
};

struct Dataset {
  Eigen::Index n_sub = 0;
  Eigen::Index k_sc = 0;
  Eigen::Index q_beams = 0;
  std::uint64_t config_hash = 0;
  std::vector<TrainingInstance> instances;
};

/// Instance i uses subarray i mod M of a fresh channel draw, an SNR uniform over
/// [train_snr_min, train_snr_max] and the first pilot-slot count of the sweep.
Dataset generate_dataset(const ExperimentConfig& cfg, int count, Seed seed);

// "XLMM", u32 version, u64 n_sub, u64 k_sc, u64 q, u64 count, u64 config hash,
// then per instance f64 snr_db, f64 zeta, W, Y, x_true as interleaved (re, im) f64.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

SparseProblem to_problem(const TrainingInstance& inst, Eigen::Index k_sc);
std::vector<SparseProblem> to_problems(const Dataset& ds);

}  // namespace xlmimo
