#include "xlmimo/gnn_train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace xlmimo {

Adam::Adam(const GnnParams& like, const TrainConfig& cfg)
    : cfg_(cfg), m_(GnnParams::zeros(like.dims)), v_(GnnParams::zeros(like.dims)) {}

void Adam::step(GnnParams& params, const GnnParams& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  std::vector<const RealMatrix*> g;
  grad.for_each([&](const std::string&, const RealMatrix& m) { g.push_back(&m); });
  std::vector<RealMatrix*> m1;
  m_.for_each([&](const std::string&, RealMatrix& m) { m1.push_back(&m); });
  std::vector<RealMatrix*> m2;
  v_.for_each([&](const std::string&, RealMatrix& m) { m2.push_back(&m); });
  std::size_t i = 0;
  params.for_each([&](const std::string&, RealMatrix& p) {
    RealMatrix& mm = *m1[i];
    RealMatrix& vv = *m2[i];
    const RealMatrix& gg = *g[i];
    mm = cfg_.beta1 * mm + (1.0 - cfg_.beta1) * gg;
    vv = cfg_.beta2 * vv + (1.0 - cfg_.beta2) * gg.cwiseAbs2();
    p.array() -= cfg_.lr * (mm.array() / c1) / ((vv.array() / c2).sqrt() + cfg_.eps);
    ++i;
  });
}

double evaluate_loss(const GnnParams& params, const std::vector<SparseProblem>& data, const UnrollOptions& opts) {
  if (data.empty()) throw Error(ErrorKind::InvalidParameter, "empty dataset");
  double total = 0.0;
  for (const auto& prob : data) total += unrolled_forward(prob, params, opts).loss;
  return total / static_cast<double>(data.size());
}

TrainResult train(const GnnParams& init, const std::vector<SparseProblem>& data, const UnrollOptions& opts,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (data.empty()) throw Error(ErrorKind::InvalidParameter, "empty training set");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw Error(ErrorKind::InvalidParameter, "bad epoch/batch settings");
  TrainResult res{init, {}};
  Adam adam(init, cfg);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_sum = 0.0;
    int batch = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++batch) {
      const std::size_t stop = std::min(order.size(), start + bs);
      std::vector<const SparseProblem*> items;
      for (std::size_t i = start; i < stop; ++i) items.push_back(&data[order[i]]);
      GradientResult g = gradients(res.params, items, opts);
      const double count = static_cast<double>(items.size());
      const double loss = g.loss_sum / count;
      g.grad *= 1.0 / count;
      if (!std::isfinite(loss) || !g.grad.all_finite()) {
        throw Error(ErrorKind::TrainingFailure, "diverged at epoch " + std::to_string(epoch) + ", batch " +
                                                    std::to_string(batch) + " (loss " + std::to_string(loss) + ")");
      }
      res.trace.push_back({epoch, batch, loss});
      epoch_sum += g.loss_sum;
      adam.step(res.params, g.grad);
    }
    if (on_epoch) on_epoch(epoch, epoch_sum / static_cast<double>(data.size()));
  }
  return res;
}

void write_loss_trace(const std::vector<LossRecord>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << "epoch,batch,loss\n";
  out.precision(17);
  for (const auto& r : trace) out << r.epoch << ',' << r.batch << ',' << r.loss << '\n';
  if (!out) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace xlmimo
