#include "xlmimo/dataset.hpp"

#include "xlmimo/binary_io.hpp"

namespace xlmimo {

namespace {

using binio::get_matrix;
using binio::put_matrix;

constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint64_t kTagDataset = 0x44415441;  // "DATA"

}  // namespace

Dataset generate_dataset(const ExperimentConfig& cfg, int count, Seed seed) {
  if (count < 1) throw Error(ErrorKind::InvalidParameter, "dataset size must be >= 1");
  SystemConfig sys = cfg.system;
  sys.p_slots = cfg.p_slots.front();
  sys.validate();

  Dataset ds;
  ds.n_sub = sys.n_sub();
  ds.k_sc = sys.k_sc;
  ds.q_beams = sys.q_beams();
  ds.config_hash = cfg.hash();
  ds.instances.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Seed s = derive_seed(seed, {kTagDataset, static_cast<std::uint64_t>(i)});
    const auto paths = draw_paths(sys, cfg.g_paths, derive_seed(s, {0}), cfg.path_law);
    const ChannelRealization chan = assemble_channel(paths, sys);
    const Eigen::Index m = i % sys.m_sub;
    const ComplexMatrix h_m = subarray_slice(chan.h, m, sys);

    TrainingInstance inst;
    Rng rng(derive_seed(s, {1}));
    inst.snr_db = rng.uniform(cfg.train_snr_min, cfg.train_snr_max);
    inst.w = hadamard_combiner(ds.n_sub, sys.n_rf, sys.p_slots, derive_seed(s, {2}));
    inst.zeta = calibrate_noise(h_m, inst.w, inst.snr_db);
    inst.y = acquire(h_m, inst.w, inst.zeta, derive_seed(s, {3}));
    inst.x_true = angular_delay(h_m);
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  binio::Writer w(path);
  w.bytes("XLMM");
  w.put(kDatasetVersion);
  w.put(static_cast<std::uint64_t>(ds.n_sub));
  w.put(static_cast<std::uint64_t>(ds.k_sc));
  w.put(static_cast<std::uint64_t>(ds.q_beams));
  w.put(static_cast<std::uint64_t>(ds.instances.size()));
  w.put(ds.config_hash);
  for (const auto& inst : ds.instances) {
    if (inst.w.rows() != ds.q_beams || inst.w.cols() != ds.n_sub || inst.y.rows() != ds.q_beams ||
        inst.y.cols() != ds.k_sc || inst.x_true.size() != ds.n_sub * ds.k_sc) {
      throw Error(ErrorKind::Shape, "dataset instance does not match header dims");
    }
    w.put(inst.snr_db);
    w.put(inst.zeta);
    put_matrix(w, inst.w);
    put_matrix(w, inst.y);
    put_matrix(w, inst.x_true.transpose());
  }
  w.finish();
}

Dataset read_dataset(const std::string& path) {
  binio::Reader r(path);
  r.expect_magic("XLMM");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw Error(ErrorKind::Format, "'" + path + "' has unsupported dataset version " + std::to_string(version));
  }
  Dataset ds;
  ds.n_sub = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  ds.k_sc = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  ds.q_beams = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  const auto count = r.get<std::uint64_t>();
  ds.config_hash = r.get<std::uint64_t>();
  if (ds.n_sub < 1 || ds.k_sc < 1 || ds.q_beams < 1 || ds.n_sub > (1 << 16) || ds.k_sc > (1 << 16) ||
      ds.q_beams > (1 << 16)) {
    throw Error(ErrorKind::Format, "'" + path + "' has implausible dims");
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    TrainingInstance inst;
    inst.snr_db = r.get<double>();
    inst.zeta = r.get<double>();
    inst.w = get_matrix(r, ds.q_beams, ds.n_sub);
    inst.y = get_matrix(r, ds.q_beams, ds.k_sc);
    inst.x_true = get_matrix(r, 1, ds.n_sub * ds.k_sc).transpose();
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

SparseProblem to_problem(const TrainingInstance& inst, Eigen::Index k_sc) {
  return vectorize_problem(inst.y, inst.w, k_sc, inst.zeta, inst.x_true);
}

std::vector<SparseProblem> to_problems(const Dataset& ds) {
  std::vector<SparseProblem> out;
  out.reserve(ds.instances.size());
  for (const auto& inst : ds.instances) out.push_back(to_problem(inst, ds.k_sc));
  return out;
}

}  // namespace xlmimo
