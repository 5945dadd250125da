#pragma once

#include <functional>
#include <vector>

#include "xlmimo/channel.hpp"

namespace xlmimo {

/// Binary Markov chain over coefficient activity plus the Gamma laws of the
/// precision in each state (active: a, b; inactive: a_bar, b_bar).
struct MarkovPrior {
  double p01 = 0.1 / 0.9 * 0.1;  // P(o_j = 1 | o_{j-1} = 0)
  double p10 = 0.1;              // P(o_j = 0 | o_{j-1} = 1)
  double a = 1.0;
  double b = 1.0;
  double a_bar = 1.0;
  double b_bar = 1e-6;

  double p00() const { return 1.0 - p01; }
  double p11() const { return 1.0 - p10; }
  double stationary() const { return p01 + p10 > 0.0 ? p01 / (p01 + p10) : 0.5; }

  /// p01 chosen so the stationary active fraction equals rho.
  static MarkovPrior from_sparsity(double rho, double p10);
  void validate() const;
};

inline constexpr ClampBounds kUpsilonClamp{1e-8, 1e12};

/// Channel fusion: sum_m F_{A,m} F_L^H Hhat_m, vectorized (angular index fastest).
ComplexVector fuse(const std::vector<ComplexMatrix>& local_angular, const SystemConfig& cfg);

/// Global angular-delay transform vec(F_A H F_D^H).
ComplexVector global_angular_delay(const ComplexMatrix& h);

RealVector msg_pi_out(const ComplexVector& x_tilde, const RealVector& tau_tilde, const MarkovPrior& prior,
                      bool exact = false);

struct ChainMessages {
  RealVector psi_f;
  RealVector psi_b;
  RealVector pi_in;
};

ChainMessages chain_forward_backward(const RealVector& pi_out, const MarkovPrior& prior);

RealVector update_upsilon(const RealVector& pi_in, const ComplexVector& x_tilde, const RealVector& tau_tilde,
                          const MarkovPrior& prior);

struct XUpdate {
  ComplexVector x_tilde;
  RealVector tau_tilde;
};

XUpdate update_x(const ComplexVector& r, double kappa_tilde, const RealVector& upsilon_tilde);

double update_kappa(const ComplexVector& r, const ComplexVector& x_tilde, const RealVector& tau_tilde);

struct RefineState {
  ComplexVector x_tilde;
  RealVector tau_tilde;
  RealVector upsilon_tilde;
  double kappa_tilde = 1.0;
  RealVector pi_out;
  RealVector pi_in;
  RealVector psi_f;
  RealVector psi_b;
};

struct RefineOptions {
  int max_iter = 50;
  double tol = 1e-6;
  bool exact_pi_out = false;
};

struct RefineResult {
  ComplexVector x;
  RefineState state;
  int iterations = 0;
};

/// Invoked after every sweep; used by tests to check per-iteration invariants.
using RefineObserver = std::function<void(const RefineState&)>;

RefineResult run_refinement(const ComplexVector& r, const MarkovPrior& prior, const RefineOptions& opts = {},
                            const RefineObserver& observer = {});

/// Draw from the generative prior: chain states (stationary start), per-entry precision
/// from the state's Gamma law, then x_j ~ CN(0, 1/precision_j).
struct MarkovSignal {
  ComplexVector x;
  std::vector<bool> active;
  RealVector precision;
};
MarkovSignal sample_markov_signal(Eigen::Index n, const MarkovPrior& prior, Seed seed);

struct Reconstruction {
  ComplexMatrix h;                   // n_t x k_sc
  std::vector<ComplexMatrix> slices; // per subarray
};

Reconstruction reconstruct(const ComplexVector& x_tilde, const SystemConfig& cfg);

}  // namespace xlmimo
