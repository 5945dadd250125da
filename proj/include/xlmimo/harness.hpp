#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "xlmimo/config.hpp"

namespace xlmimo {

/// Coordinates of one Monte Carlo trial in the sweep.
struct Cell {
  double snr_db = 0.0;
  Eigen::Index p_slots = 0;
  int trial = 0;
};

/// Everything observed in one trial: the true channel, every subarray's combiner
/// and pilots, and the shared noise precision.
struct TrialInstance {
  Cell cell;
  SystemConfig system;  // p_slots already set to cell.p_slots
  ComplexMatrix h;
  std::vector<ComplexMatrix> w;
  std::vector<ComplexMatrix> y;
  double zeta = 1.0;
};

/// Channel depends on (master, trial); combiners and noise also on the cell and subarray.
TrialInstance draw_trial(const ExperimentConfig& cfg, const Cell& cell, Seed master);

// "XLMT", u32 version, f64 snr_db, u64 p_slots, i64 trial, u64 n_t, m_sub, k_sc, n_rf,
// f64 f_c, f_s, zeta, then H, each W_m, each Y_m as interleaved (re, im) f64.
void save_instance(const TrialInstance& inst, const std::string& path);
TrialInstance load_instance(const std::string& path);

struct ResultRow {
  std::string estimator;
  double snr_db = 0.0;
  Eigen::Index p_slots = 0;
  int trial = 0;  // -1 on aggregate rows
  double nmse_local_db = 0.0;
  double nmse_global_db = 0.0;
  double wall_time_ms = 0.0;
};

/// 10 log10(|est - truth|^2 / |truth|^2), floored at -200 dB.
double nmse_db(const ComplexMatrix& est, const ComplexMatrix& truth);
inline constexpr double kNmseFloorDb = -200.0;

struct ArmResult {
  ResultRow row;
  ComplexMatrix h;  // global estimate, n_t x k_sc
};

struct RunOptions {
  bool timing = false;  // leave wall_time_ms at 0 unless set, so output stays reproducible
};

/// Runs every configured arm on one trial: Stage-I per LPU (concurrently), fusion,
/// optional refinement and reconstruction, plus the centralized reference.
/// `params` must be non-null when sbl-gnn is among the estimators.
std::vector<ArmResult> run_two_stage(const ExperimentConfig& cfg, const TrialInstance& inst,
                                     const GnnParams* params, const RunOptions& opts = {});

std::vector<std::string> arm_labels(const ExperimentConfig& cfg);

struct BenchOptions {
  bool timing = false;
  std::string instances_dir;  // when set, every trial instance is saved there
  std::ostream* log = nullptr;
};

/// Per-trial rows for the whole sweep followed by one mean row per (cell, arm).
/// A trial that throws is reported on `log` and left out; the sweep continues.
std::vector<ResultRow> bench(const ExperimentConfig& cfg, const GnnParams* params, const BenchOptions& opts = {});

/// Mean rows (trial = -1) over the finite per-trial rows of each (arm, snr, p_slots).
std::vector<ResultRow> aggregate(const std::vector<ResultRow>& rows);

inline constexpr const char* kCsvHeader = "estimator,snr_db,p_slots,trial,nmse_local_db,nmse_global_db,wall_time_ms";
void write_csv(const std::vector<ResultRow>& rows, std::ostream& out);
std::string instance_filename(const Cell& cell);

}  // namespace xlmimo
