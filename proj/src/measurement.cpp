#include "xlmimo/measurement.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace xlmimo {

SparseProblem make_problem(ComplexVector y, ComplexMatrix phi, double zeta_true, std::optional<ComplexVector> x_true) {
  if (y.size() != phi.rows()) throw Error(ErrorKind::Shape, "observation length does not match operator rows");
  if (x_true && x_true->size() != phi.cols()) throw Error(ErrorKind::Shape, "ground truth length mismatch");
  SparseProblem p;
  p.gram = phi.adjoint() * phi;
  p.phi_h_y = phi.adjoint() * y;
  p.y = std::move(y);
  p.phi = std::move(phi);
  p.zeta_true = zeta_true;
  p.x_true = std::move(x_true);
  return p;
}

ComplexMatrix acquire(const ComplexMatrix& h_m, const ComplexMatrix& w_m, double zeta, Seed seed) {
  if (w_m.cols() != h_m.rows()) {
    throw Error(ErrorKind::Shape, "combiner has " + std::to_string(w_m.cols()) + " columns, channel has " +
                                      std::to_string(h_m.rows()) + " rows");
  }
  if (!(zeta > 0.0)) throw Error(ErrorKind::InvalidParameter, "noise precision must be positive");
  ComplexMatrix y = w_m * h_m;
  if (!std::isinf(zeta)) y += sample_cgaussian(y.rows(), y.cols(), 1.0 / zeta, seed);
  return y;
}

ComplexMatrix measurement_operator(const ComplexMatrix& w, Eigen::Index k_sc) {
  const ComplexMatrix f_l = unitary_dft(w.cols());
  const ComplexMatrix f_d = unitary_dft(k_sc);
  const ComplexMatrix inner = w * f_l.adjoint();
  return kron(f_d.transpose(), inner);
}

SparseProblem vectorize_problem(const ComplexMatrix& y_m, const ComplexMatrix& w_m, Eigen::Index k_sc, double zeta,
                                std::optional<ComplexVector> x_true) {
  if (y_m.rows() != w_m.rows() || y_m.cols() != k_sc) {
    throw Error(ErrorKind::Shape, "pilot matrix must be Q x K with Q = combiner rows");
  }
  const ComplexMatrix f_l = unitary_dft(w_m.cols());
  const ComplexMatrix f_d = unitary_dft(k_sc);
  const ComplexMatrix inner = w_m * f_l.adjoint();

  SparseProblem p;
  p.y = vec(y_m);
  p.phi = kron(f_d.transpose(), inner);
  p.zeta_true = zeta;
  if (x_true && x_true->size() != p.phi.cols()) throw Error(ErrorKind::Shape, "ground truth length mismatch");
  p.x_true = std::move(x_true);
  p.phi_h_y = p.phi.adjoint() * p.y;

  const ComplexMatrix block = inner.adjoint() * inner;
  const Eigen::Index nb = block.rows();
  p.gram = ComplexMatrix::Zero(nb * k_sc, nb * k_sc);
  for (Eigen::Index k = 0; k < k_sc; ++k) p.gram.block(k * nb, k * nb, nb, nb) = block;
  p.block_size = nb;
  return p;
}

ComplexVector angular_delay(const ComplexMatrix& h) {
  const ComplexMatrix f_l = unitary_dft(h.rows());
  const ComplexMatrix f_d = unitary_dft(h.cols());
  return vec(f_l * h * f_d.adjoint());
}

double calibrate_noise(const ComplexMatrix& h, const ComplexMatrix& w, double snr_db) {
  if (w.cols() != h.rows()) throw Error(ErrorKind::Shape, "combiner does not conform to channel");
  const double energy = (w * h).squaredNorm();
  if (!(energy > 0.0)) throw Error(ErrorKind::Division, "received signal energy is zero");
  const double entries = static_cast<double>(w.rows() * h.cols());
  return entries / energy * std::pow(10.0, snr_db / 10.0);
}

ComplexMatrix block_diagonal(const std::vector<ComplexMatrix>& blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  ComplexMatrix out = ComplexMatrix::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

}  // namespace xlmimo
