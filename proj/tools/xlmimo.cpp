// Command-line front end: gen-data, train, estimate, bench.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xlmimo/dataset.hpp"
#include "xlmimo/harness.hpp"

namespace fs = std::filesystem;
using namespace xlmimo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config file")->required();
  cmd->add_option("--seed", c.seed, "master seed (overrides [run] seed)");
  cmd->add_option("--out", c.out, "output path")->required();
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  // A relative checkpoint in the config is taken relative to the config file.
  if (!cfg.checkpoint.empty() && fs::path(cfg.checkpoint).is_relative()) {
    cfg.checkpoint = (fs::path(c.config).parent_path() / cfg.checkpoint).string();
  }
  return cfg;
}

bool needs_gnn(const ExperimentConfig& cfg) {
  for (const auto& e : cfg.estimators) {
    if (e == kSblGnn) return true;
  }
  return false;
}

std::optional<GnnParams> load_params(const ExperimentConfig& cfg, const std::string& override_path) {
  if (!needs_gnn(cfg)) return std::nullopt;
  const std::string path = override_path.empty() ? cfg.checkpoint : override_path;
  if (path.empty()) throw Error(ErrorKind::Usage, "sbl-gnn needs a checkpoint (--checkpoint or [gnn] checkpoint)");
  GnnParams p = load_checkpoint(path);
  if (!(p.dims == cfg.gnn_dims)) throw Error(ErrorKind::Format, "checkpoint '" + path + "' has other layer sizes");
  return p;
}

void write_rows(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  write_csv(rows, out);
  if (!out) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage decentralized XL-MIMO channel estimation lab"};
  app.require_subcommand(1);

  Common gen_c;
  int gen_count = 0;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a training dataset");
  add_common(gen, gen_c);
  gen->add_option("--count", gen_count, "number of instances (default [train] samples)");

  Common train_c;
  std::string train_data;
  std::string train_trace;
  CLI::App* tr = app.add_subcommand("train", "train the prior-updater network");
  add_common(tr, train_c);
  tr->add_option("--data", train_data, "dataset from gen-data (generated in memory when absent)");
  tr->add_option("--trace", train_trace, "per-batch loss CSV");

  Common est_c;
  std::string est_instance;
  std::string est_ckpt;
  Cell est_cell{5.0, 8, 0};
  CLI::App* est = app.add_subcommand("estimate", "run every arm on one trial");
  add_common(est, est_c);
  est->add_option("--instance", est_instance, "saved trial instance (from bench --instances-dir)");
  est->add_option("--snr", est_cell.snr_db, "SNR of a freshly drawn trial");
  est->add_option("--p-slots", est_cell.p_slots, "pilot slots of a freshly drawn trial");
  est->add_option("--trial", est_cell.trial, "trial index of a freshly drawn trial");
  est->add_option("--checkpoint", est_ckpt, "trained network");

  Common bench_c;
  std::string bench_ckpt;
  std::string bench_instances;
  bool bench_timing = false;
  CLI::App* bn = app.add_subcommand("bench", "sweep SNR x pilot slots x estimator x refinement");
  add_common(bn, bench_c);
  bn->add_option("--checkpoint", bench_ckpt, "trained network");
  bn->add_option("--instances-dir", bench_instances, "save every trial instance here");
  bn->add_flag("--timing", bench_timing, "fill wall_time_ms (output is then not reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const ExperimentConfig cfg = load(gen_c);
      const int count = gen_count > 0 ? gen_count : cfg.train_samples;
      write_dataset(generate_dataset(cfg, count, Seed{cfg.seed}), gen_c.out);
      std::cout << "wrote " << count << " instances to " << gen_c.out << '\n';
    } else if (tr->parsed()) {
      const ExperimentConfig cfg = load(train_c);
      const Dataset ds =
          train_data.empty() ? generate_dataset(cfg, cfg.train_samples, Seed{cfg.seed}) : read_dataset(train_data);
      const auto data = to_problems(ds);
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(Seed{cfg.seed}, {0x545241494eULL});
      const GnnParams init = GnnParams::glorot(cfg.gnn_dims, derive_seed(Seed{cfg.seed}, {0x494e4954ULL}));
      const TrainResult res = train(init, data, cfg.gnn, tc, [](int epoch, double loss) {
        std::cout << "epoch " << epoch << " loss " << loss << std::endl;
      });
      save_checkpoint(res.params, train_c.out);
      if (!train_trace.empty()) write_loss_trace(res.trace, train_trace);
    } else if (est->parsed()) {
      const ExperimentConfig cfg = load(est_c);
      const auto params = load_params(cfg, est_ckpt);
      const TrialInstance inst =
          est_instance.empty() ? draw_trial(cfg, est_cell, Seed{cfg.seed}) : load_instance(est_instance);
      std::vector<ResultRow> rows;
      ExperimentConfig run_cfg = cfg;
      run_cfg.system = inst.system;
      for (auto& arm : run_two_stage(run_cfg, inst, params ? &*params : nullptr)) rows.push_back(arm.row);
      write_rows(rows, est_c.out);
    } else if (bn->parsed()) {
      const ExperimentConfig cfg = load(bench_c);
      const auto params = load_params(cfg, bench_ckpt);
      BenchOptions opts;
      opts.timing = bench_timing;
      opts.instances_dir = bench_instances;
      opts.log = &std::cerr;
      write_rows(bench(cfg, params ? &*params : nullptr, opts), bench_c.out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
