#pragma once

#include <optional>
#include <vector>

#include "xlmimo/channel.hpp"

namespace xlmimo {

struct PilotSetup {
  std::vector<ComplexMatrix> combiners;  // one W_m (Q x n_sub) per subarray
  Eigen::Index q_beams = 0;
  double zeta = 1.0;
};

/// y = phi * x + n for one subarray (or the whole array in the centralized arm).
///
/// `gram` and `phi_h_y` are cached because every SBL iteration needs them. When the
/// operator has the Kronecker form F_D^T (x) A with unitary F_D, the Gram matrix is
/// I_K (x) A^H A; `block_size` then records the size of A^H A so the E-step can solve
/// K independent systems instead of one dense one.
struct SparseProblem {
  ComplexVector y;
  ComplexMatrix phi;
  double zeta_true = 1.0;
  std::optional<ComplexVector> x_true;

  ComplexMatrix gram;
  ComplexVector phi_h_y;
  Eigen::Index block_size = 0;  // 0 = no structure known

  Eigen::Index n() const { return phi.cols(); }
  Eigen::Index m() const { return phi.rows(); }
};

/// Builds a problem from an arbitrary operator; caches are formed densely.
SparseProblem make_problem(ComplexVector y, ComplexMatrix phi, double zeta_true,
                           std::optional<ComplexVector> x_true = std::nullopt);

/// Y = W H + N with N i.i.d. CN(0, 1/zeta). zeta = +inf disables the noise.
ComplexMatrix acquire(const ComplexMatrix& h_m, const ComplexMatrix& w_m, double zeta, Seed seed);

/// phi = F_D^T (x) (W F_L^H); F_L has the size of W's column count.
ComplexMatrix measurement_operator(const ComplexMatrix& w, Eigen::Index k_sc);

SparseProblem vectorize_problem(const ComplexMatrix& y_m, const ComplexMatrix& w_m, Eigen::Index k_sc, double zeta,
                                std::optional<ComplexVector> x_true = std::nullopt);

/// Local angular-delay channel F_L H F_D^H, vectorized.
ComplexVector angular_delay(const ComplexMatrix& h);

/// Noise precision giving the requested received SNR for Y = W H + N.
double calibrate_noise(const ComplexMatrix& h, const ComplexMatrix& w, double snr_db);

ComplexMatrix block_diagonal(const std::vector<ComplexMatrix>& blocks);

}  // namespace xlmimo
