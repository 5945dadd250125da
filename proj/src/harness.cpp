#include "xlmimo/harness.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <ostream>
#include <tuple>

#include "xlmimo/binary_io.hpp"

namespace xlmimo {

namespace {

constexpr std::uint64_t kTagChannel = 1;
constexpr std::uint64_t kTagCombiner = 2;
constexpr std::uint64_t kTagNoise = 3;
constexpr std::uint32_t kInstanceVersion = 1;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Local angular-delay estimate (n_sub x k_sc) of one LPU.
ComplexMatrix stage_one(const ExperimentConfig& cfg, const std::string& estimator, const SparseProblem& prob,
                        const GnnParams* params, Eigen::Index n_sub, Eigen::Index k_sc) {
  ComplexVector mu;
  if (estimator == kStdSbl) {
    StdSblUpdater updater;
    mu = run_sbl(prob, updater, cfg.std_sbl).mu;
  } else {
    mu = unrolled_forward(prob, *params, cfg.gnn).mu;
  }
  return unvec(mu, n_sub, k_sc);
}

double mean_slice_nmse(const std::vector<ComplexMatrix>& est, const ComplexMatrix& h, const SystemConfig& sys) {
  double acc = 0.0;
  for (Eigen::Index m = 0; m < sys.m_sub; ++m) {
    acc += nmse_db(est[static_cast<std::size_t>(m)], subarray_slice(h, m, sys));
  }
  return acc / static_cast<double>(sys.m_sub);
}

}  // namespace

double nmse_db(const ComplexMatrix& est, const ComplexMatrix& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols()) {
    throw Error(ErrorKind::Shape, "estimate and truth differ in shape");
  }
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw Error(ErrorKind::Division, "NMSE against an all-zero channel");
  const double ratio = (est - truth).squaredNorm() / denom;
  if (ratio <= 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

TrialInstance draw_trial(const ExperimentConfig& cfg, const Cell& cell, Seed master) {
  TrialInstance inst;
  inst.cell = cell;
  inst.system = cfg.system;
  inst.system.p_slots = cell.p_slots;
  inst.system.validate();
  const SystemConfig& sys = inst.system;

  const auto trial = static_cast<std::uint64_t>(cell.trial);
  const auto p = static_cast<std::uint64_t>(cell.p_slots);
  const auto snr_bits = std::bit_cast<std::uint64_t>(cell.snr_db);
  const auto paths = draw_paths(sys, cfg.g_paths, derive_seed(master, {kTagChannel, trial}), cfg.path_law);
  inst.h = assemble_channel(paths, sys).h;

  for (Eigen::Index m = 0; m < sys.m_sub; ++m) {
    const auto mm = static_cast<std::uint64_t>(m);
    inst.w.push_back(hadamard_combiner(sys.n_sub(), sys.n_rf, sys.p_slots,
                                       derive_seed(master, {kTagCombiner, trial, mm, p})));
  }
  inst.zeta = calibrate_noise(inst.h, block_diagonal(inst.w), cell.snr_db);
  for (Eigen::Index m = 0; m < sys.m_sub; ++m) {
    const auto mm = static_cast<std::uint64_t>(m);
    inst.y.push_back(acquire(subarray_slice(inst.h, m, sys), inst.w[static_cast<std::size_t>(m)], inst.zeta,
                             derive_seed(master, {kTagNoise, trial, mm, p, snr_bits})));
  }
  return inst;
}

void save_instance(const TrialInstance& inst, const std::string& path) {
  const SystemConfig& s = inst.system;
  binio::Writer w(path);
  w.bytes("XLMT");
  w.put(kInstanceVersion);
  w.put(inst.cell.snr_db);
  w.put(static_cast<std::uint64_t>(inst.cell.p_slots));
  w.put(static_cast<std::int64_t>(inst.cell.trial));
  for (Eigen::Index v : {s.n_t, s.m_sub, s.k_sc, s.n_rf}) w.put(static_cast<std::uint64_t>(v));
  w.put(s.f_c);
  w.put(s.f_s);
  w.put(inst.zeta);
  binio::put_matrix(w, inst.h);
  for (const auto& m : inst.w) binio::put_matrix(w, m);
  for (const auto& m : inst.y) binio::put_matrix(w, m);
  w.finish();
}

TrialInstance load_instance(const std::string& path) {
  binio::Reader r(path);
  r.expect_magic("XLMT");
  const auto version = r.get<std::uint32_t>();
  if (version != kInstanceVersion) {
    throw Error(ErrorKind::Format, "'" + path + "' has unsupported instance version " + std::to_string(version));
  }
  TrialInstance inst;
  inst.cell.snr_db = r.get<double>();
  inst.cell.p_slots = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  inst.cell.trial = static_cast<int>(r.get<std::int64_t>());
  SystemConfig& s = inst.system;
  s.n_t = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  s.m_sub = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  s.k_sc = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  s.n_rf = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  s.f_c = r.get<double>();
  s.f_s = r.get<double>();
  s.p_slots = inst.cell.p_slots;
  if (s.n_t > (1 << 16) || s.k_sc > (1 << 16) || s.n_rf > (1 << 10) || s.p_slots > (1 << 16)) {
    throw Error(ErrorKind::Format, "'" + path + "' has implausible dims");
  }
  s.validate();
  inst.zeta = r.get<double>();
  inst.h = binio::get_matrix(r, s.n_t, s.k_sc);
  for (Eigen::Index m = 0; m < s.m_sub; ++m) inst.w.push_back(binio::get_matrix(r, s.q_beams(), s.n_sub()));
  for (Eigen::Index m = 0; m < s.m_sub; ++m) inst.y.push_back(binio::get_matrix(r, s.q_beams(), s.k_sc));
  return inst;
}

std::vector<std::string> arm_labels(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& e : cfg.estimators) {
    for (bool refine : cfg.refinement) out.push_back(refine ? e + "+refine" : e);
  }
  if (cfg.centralized) out.emplace_back("centralized");
  return out;
}

std::vector<ArmResult> run_two_stage(const ExperimentConfig& cfg, const TrialInstance& inst, const GnnParams* params,
                                     const RunOptions& opts) {
  const SystemConfig& sys = inst.system;
  const Eigen::Index n_sub = sys.n_sub();
  bool need_gnn = false;
  for (const auto& e : cfg.estimators) need_gnn = need_gnn || e == kSblGnn;
  if (need_gnn && params == nullptr) throw Error(ErrorKind::InvalidParameter, "sbl-gnn requires trained parameters");

  std::vector<SparseProblem> probs;
  for (Eigen::Index m = 0; m < sys.m_sub; ++m) {
    const auto i = static_cast<std::size_t>(m);
    probs.push_back(vectorize_problem(inst.y[i], inst.w[i], sys.k_sc, inst.zeta,
                                      angular_delay(subarray_slice(inst.h, m, sys))));
  }

  std::vector<ArmResult> out;
  const auto make_row = [&](const std::string& label) {
    ResultRow row;
    row.estimator = label;
    row.snr_db = inst.cell.snr_db;
    row.p_slots = inst.cell.p_slots;
    row.trial = inst.cell.trial;
    return row;
  };

  for (const auto& estimator : cfg.estimators) {
    const auto start = Clock::now();
    // One task per LPU; every task only reads its own problem, so the schedule cannot
    // change the result.
    std::vector<ComplexMatrix> local(probs.size());
    if (cfg.parallel_lpus && probs.size() > 1) {
      std::vector<std::future<ComplexMatrix>> tasks;
      for (const auto& prob : probs) {
        tasks.push_back(std::async(std::launch::async, [&cfg, &estimator, &prob, params, n_sub, &sys] {
          return stage_one(cfg, estimator, prob, params, n_sub, sys.k_sc);
        }));
      }
      for (std::size_t i = 0; i < tasks.size(); ++i) local[i] = tasks[i].get();
    } else {
      for (std::size_t i = 0; i < probs.size(); ++i) local[i] = stage_one(cfg, estimator, probs[i], params, n_sub, sys.k_sc);
    }
    const double stage_one_ms = elapsed_ms(start);
    const ComplexVector fused = fuse(local, sys);

    for (bool refine : cfg.refinement) {
      const auto start2 = Clock::now();
      ResultRow row = make_row(refine ? estimator + "+refine" : estimator);
      Reconstruction rec;
      if (refine) {
        rec = reconstruct(run_refinement(fused, cfg.markov, cfg.refine).x, sys);
      } else {
        rec = reconstruct(fused, sys);
      }
      row.nmse_local_db = mean_slice_nmse(rec.slices, inst.h, sys);
      row.nmse_global_db = nmse_db(rec.h, inst.h);
      if (opts.timing) row.wall_time_ms = stage_one_ms + elapsed_ms(start2);
      out.push_back({row, std::move(rec.h)});
    }
  }

  if (cfg.centralized) {
    const auto start = Clock::now();
    ComplexMatrix y_all(sys.q_beams() * sys.m_sub, sys.k_sc);
    for (Eigen::Index m = 0; m < sys.m_sub; ++m) {
      y_all.middleRows(m * sys.q_beams(), sys.q_beams()) = inst.y[static_cast<std::size_t>(m)];
    }
    const SparseProblem prob =
        vectorize_problem(y_all, block_diagonal(inst.w), sys.k_sc, inst.zeta, global_angular_delay(inst.h));
    StdSblUpdater updater;
    const ComplexVector mu = run_sbl(prob, updater, cfg.std_sbl).mu;
    const Reconstruction rec = reconstruct(mu, sys);
    ResultRow row = make_row("centralized");
    row.nmse_local_db = mean_slice_nmse(rec.slices, inst.h, sys);
    row.nmse_global_db = nmse_db(rec.h, inst.h);
    if (opts.timing) row.wall_time_ms = elapsed_ms(start);
    out.push_back({row, rec.h});
  }
  return out;
}

std::string instance_filename(const Cell& cell) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "snr%+.3f_p%lld_t%d.xlmt", cell.snr_db, static_cast<long long>(cell.p_slots),
                cell.trial);
  return buf;
}

std::vector<ResultRow> bench(const ExperimentConfig& cfg, const GnnParams* params, const BenchOptions& opts) {
  cfg.validate();
  if (!opts.instances_dir.empty()) std::filesystem::create_directories(opts.instances_dir);
  const Seed master{cfg.seed};
  std::vector<ResultRow> rows;
  for (Eigen::Index p : cfg.p_slots) {
    for (double snr : cfg.snr_db) {
      for (int t = 0; t < cfg.trials; ++t) {
        const Cell cell{snr, p, t};
        try {
          const TrialInstance inst = draw_trial(cfg, cell, master);
          if (!opts.instances_dir.empty()) {
            save_instance(inst, (std::filesystem::path(opts.instances_dir) / instance_filename(cell)).string());
          }
          for (auto& arm : run_two_stage(cfg, inst, params, {opts.timing})) rows.push_back(std::move(arm.row));
        } catch (const Error& e) {
          if (opts.log) *opts.log << "trial " << t << " (snr " << snr << ", p " << p << ") failed: " << e.what() << '\n';
        }
      }
    }
  }
  std::vector<ResultRow> agg = aggregate(rows);
  rows.insert(rows.end(), agg.begin(), agg.end());
  return rows;
}

std::vector<ResultRow> aggregate(const std::vector<ResultRow>& rows) {
  // Keyed by first appearance so the output order follows the sweep order.
  using Key = std::tuple<std::string, double, Eigen::Index>;
  std::vector<Key> order;
  std::map<Key, std::pair<ResultRow, int>> acc;
  for (const auto& r : rows) {
    if (r.trial < 0) continue;
    if (!std::isfinite(r.nmse_local_db) || !std::isfinite(r.nmse_global_db)) continue;
    const Key key{r.estimator, r.snr_db, r.p_slots};
    auto it = acc.find(key);
    if (it == acc.end()) {
      order.push_back(key);
      ResultRow base = r;
      base.trial = -1;
      base.nmse_local_db = base.nmse_global_db = base.wall_time_ms = 0.0;
      it = acc.emplace(key, std::make_pair(base, 0)).first;
    }
    ResultRow& a = it->second.first;
    a.nmse_local_db += r.nmse_local_db;
    a.nmse_global_db += r.nmse_global_db;
    a.wall_time_ms += r.wall_time_ms;
    ++it->second.second;
  }
  std::vector<ResultRow> out;
  for (const auto& key : order) {
    auto [row, count] = acc.at(key);
    row.nmse_local_db /= count;
    row.nmse_global_db /= count;
    row.wall_time_ms /= count;
    out.push_back(row);
  }
  return out;
}

void write_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << kCsvHeader << '\n';
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6g,%lld,%d,%.6f,%.6f,%.3f\n", r.estimator.c_str(), r.snr_db,
                  static_cast<long long>(r.p_slots), r.trial, r.nmse_local_db, r.nmse_global_db, r.wall_time_ms);
    out << buf;
  }
}

}  // namespace xlmimo
