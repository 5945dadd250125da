#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xlmimo/gnn_prior.hpp"

namespace xlmimo {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Seed seed{0};
};

struct LossRecord {
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;  // mean per-instance loss of the batch before the step
};

struct TrainResult {
  GnnParams params;
  std::vector<LossRecord> trace;
};

class Adam {
 public:
  Adam(const GnnParams& like, const TrainConfig& cfg);
  void step(GnnParams& params, const GnnParams& grad);

 private:
  TrainConfig cfg_;
  GnnParams m_;
  GnnParams v_;
  int t_ = 0;
};

/// Mean per-instance loss of `params` over `data`.
double evaluate_loss(const GnnParams& params, const std::vector<SparseProblem>& data, const UnrollOptions& opts);

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Mini-batch Adam on the mean batch loss; one parameter set shared by every instance.
TrainResult train(const GnnParams& init, const std::vector<SparseProblem>& data, const UnrollOptions& opts,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

void write_loss_trace(const std::vector<LossRecord>& trace, const std::string& path);

}  // namespace xlmimo
