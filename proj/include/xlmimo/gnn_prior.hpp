#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xlmimo/sbl.hpp"

namespace xlmimo {

/// y = w x + b, stored with vectors as single-column matrices so every learnable
/// tensor has the same type.
struct Dense {
  RealMatrix w;  // out x in
  RealMatrix b;  // out x 1
};

struct GruWeights {
  RealMatrix w_ih;  // 3h x in, gate order (reset, update, candidate)
  RealMatrix w_hh;  // 3h x h
  RealMatrix b_ih;  // 3h x 1
  RealMatrix b_hh;  // 3h x 1
};

struct GnnDims {
  Eigen::Index n_u = 8;
  Eigen::Index n_h1 = 64;
  Eigen::Index n_h2 = 32;
  friend bool operator==(const GnnDims&, const GnnDims&) = default;
};

inline constexpr Eigen::Index kNodeAttrs = 4;
inline constexpr Eigen::Index kEdgeAttrs = 3;

/// All learnable tensors of the prior-updater network. The same type doubles as
/// the gradient container.
struct GnnParams {
  GnnDims dims;
  Dense in_map;                // n_u x 4
  Dense prop1, prop2, prop3;   // (2 n_u + 3) -> n_h1 -> n_h2 -> n_u
  GruWeights gru;              // input n_u + 4, hidden n_h1
  Dense out_map;               // n_u x n_h1
  Dense read1, read2, read3;   // n_u -> n_h1 -> n_h2 -> 1

  static GnnParams zeros(const GnnDims& dims);
  /// Glorot-uniform weights, zero biases, readout output bias 1 (so gamma starts near 1).
  static GnnParams glorot(const GnnDims& dims, Seed seed);

  void for_each(const std::function<void(const std::string&, RealMatrix&)>& f);
  void for_each(const std::function<void(const std::string&, const RealMatrix&)>& f) const;

  std::size_t parameter_count() const;
  bool all_finite() const;
  GnnParams& operator+=(const GnnParams& other);
  GnnParams& operator*=(double s);
};

struct MrfHyper {
  double alpha = 0.1;
  double beta = 0.5;
};

/// Graph built from one posterior. Edge (n,k) carries [Re v_nk, beta, zeta]; only the
/// first entry varies, so it is kept as an n x n matrix and the constants as scalars.
struct GraphAttributes {
  RealMatrix node;        // n x 4: [Re(mu^H v_n), v_nn, alpha, zeta]
  RealMatrix edge_first;  // n x n: Re v_nk
  double beta = 0.0;
  double zeta = 0.0;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;

  // Retained directed edges grouped by receiving node: edges of node n are
  // [offset[n], offset[n+1]) in `neighbor`.
  std::vector<Eigen::Index> offset;
  std::vector<Eigen::Index> neighbor;

  Eigen::Index nodes() const { return node.rows(); }
  Eigen::Index edges() const { return static_cast<Eigen::Index>(neighbor.size()); }
  std::array<double, 3> edge(Eigen::Index n, Eigen::Index k) const { return {edge_first(n, k), beta, zeta}; }
};

/// k_edges >= n-1 keeps the full graph; otherwise each node keeps its k_edges largest
/// |v_nk| and the mask is symmetrized by union.
GraphAttributes graph_attributes(const PosteriorState& post, const MrfHyper& hyper, double zeta,
                                 Eigen::Index k_edges);

struct HiddenState {
  RealMatrix u;  // n x n_u
  RealMatrix g;  // n x n_h1
};

HiddenState init_hidden(const GraphAttributes& attrs, const GnnParams& params);

/// Per-edge messages c^{n,k}, row e for edge (edge_target[e], edge_source[e]).
struct EdgeMessages {
  std::vector<Eigen::Index> target;  // n
  std::vector<Eigen::Index> source;  // k
  RealMatrix c;                      // edges x n_u
};

EdgeMessages propagate(const HiddenState& state, const GraphAttributes& attrs, const GnnParams& params);

HiddenState aggregate(const HiddenState& state, const EdgeMessages& messages, const GraphAttributes& attrs,
                      const GnnParams& params);

RealVector readout(const HiddenState& state, const GnnParams& params);

/// One propagate + aggregate round using the factored first layer; numerically the
/// same map as aggregate(propagate(...)) without materializing the per-edge outputs.
HiddenState message_round(const HiddenState& state, const GraphAttributes& attrs, const GnnParams& params);

struct GnnUpdate {
  RealVector gamma;
  HiddenState state;
};

/// L message rounds from `state` (or from init_hidden when absent), then readout.
GnnUpdate gnn_prior_update(const PosteriorState& post, const PriorState& prior, const GnnParams& params,
                           const MrfHyper& hyper, const std::optional<HiddenState>& state, int rounds,
                           Eigen::Index k_edges = -1);

struct GnnOptions {
  int rounds = 3;            // L
  Eigen::Index k_edges = -1; // < 0 or >= n-1: full graph
  MrfHyper hyper;
};

/// SBL prior updater backed by the network; hidden state persists across outer iterations.
class GnnUpdater final : public PriorUpdater {
 public:
  GnnUpdater(const GnnParams& params, const GnnOptions& opts) : params_(params), opts_(opts) {}
  void reset(const SparseProblem& prob) override;
  RealVector update(const PosteriorState& post, const PriorState& prior) override;

 private:
  const GnnParams& params_;
  GnnOptions opts_;
  std::optional<HiddenState> state_;
};

/// Settings shared by the unrolled SBL-GNN forward pass and its gradient.
struct UnrollOptions {
  int layers = 5;  // T
  GnnOptions gnn;
  bool refresh_noise = true;
  double zeta_init = 0.0;  // <= 0: use the problem's calibrated value
};

struct UnrollResult {
  ComplexVector mu;
  double loss = 0.0;                // mean |mu - x|^2 over entries
  std::vector<double> zeta_trace;   // zeta used by each E-step, length layers + 1
};

/// Forward pass of the unrolled estimator. When `frozen_zeta` is given, the noise
/// precision sequence is taken from it instead of being re-estimated.
UnrollResult unrolled_forward(const SparseProblem& prob, const GnnParams& params, const UnrollOptions& opts,
                              const std::vector<double>* frozen_zeta = nullptr);

struct GradientResult {
  double loss_sum = 0.0;
  GnnParams grad;  // gradient of loss_sum
};

/// Exact reverse-mode gradient of the summed per-instance loss. The noise-precision
/// re-estimation is treated as a constant (stop-gradient); everything else, including
/// the dependence of the final posterior mean and of v_nn on gamma, is differentiated.
GradientResult gradients(const GnnParams& params, const std::vector<const SparseProblem*>& batch,
                         const UnrollOptions& opts);

// Checkpoint: "GNNP", u32 version, u32 tensor count, then per tensor
// u32 name length, name bytes, u32 rank, u64 dims[rank], f64 payload (row-major).
void save_checkpoint(const GnnParams& params, const std::string& path);
GnnParams load_checkpoint(const std::string& path);

}  // namespace xlmimo
