#include "xlmimo/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace xlmimo {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool is_power_of_two(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

// Sylvester construction: H[i][j] = (-1)^popcount(i & j).
double hadamard_entry(Eigen::Index i, Eigen::Index j) {
  return (__builtin_popcountll(static_cast<unsigned long long>(i & j)) & 1) ? -1.0 : 1.0;
}

void check_hpd_input(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::Shape, "hpd matrix must be square, got " + std::to_string(a.rows()) + "x" +
                                      std::to_string(a.cols()));
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (hermitian_defect(a) > 1e-10 * scale) {
    throw Error(ErrorKind::NumericalFailure, "matrix is not Hermitian");
  }
}

}  // namespace

Seed derive_seed(Seed master, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(master.value);
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return Seed{h};
}

cd Rng::cgaussian(double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = normal(s);
  const double im = normal(s);
  return {re, im};
}

ComplexMatrix unitary_dft(Eigen::Index n) {
  if (n < 1) throw Error(ErrorKind::InvalidDimension, "DFT size must be >= 1");
  ComplexMatrix f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      // Reduce the exponent modulo n before the trig call to keep phases exact for large jk.
      const double phase = -2.0 * kPi * static_cast<double>((j * k) % n) / static_cast<double>(n);
      f(j, k) = std::polar(scale, phase);
    }
  }
  return f;
}

ComplexMatrix hadamard_combiner(Eigen::Index n_antennas, Eigen::Index n_rf, Eigen::Index n_slots, Seed seed) {
  if (!is_power_of_two(n_antennas)) {
    throw Error(ErrorKind::UnsupportedDimension,
                "Hadamard combiner needs a power-of-two antenna count, got " + std::to_string(n_antennas));
  }
  if (n_rf < 1 || n_slots < 1) throw Error(ErrorKind::InvalidDimension, "n_rf and n_slots must be >= 1");
  const Eigen::Index q = n_rf * n_slots;
  if (q > n_antennas) {
    throw Error(ErrorKind::InsufficientRows, "requested " + std::to_string(q) + " beams from a " +
                                                 std::to_string(n_antennas) + "-row Hadamard matrix");
  }
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n_antennas));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng.engine());

  const double scale = 1.0 / std::sqrt(static_cast<double>(n_antennas));
  ComplexMatrix w(q, n_antennas);
  for (Eigen::Index r = 0; r < q; ++r) {
    for (Eigen::Index c = 0; c < n_antennas; ++c) w(r, c) = scale * hadamard_entry(rows[r], c);
  }
  return w;
}

ComplexMatrix sample_cgaussian(Eigen::Index rows, Eigen::Index cols, double variance, Seed seed) {
  if (!(variance >= 0.0)) throw Error(ErrorKind::InvalidParameter, "variance must be non-negative");
  ComplexMatrix out(rows, cols);
  if (variance == 0.0) {
    out.setZero();
    return out;
  }
  Rng rng(seed);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = rng.cgaussian(variance);
  return out;
}

ComplexMatrix hpd_solve(const ComplexMatrix& a, const ComplexMatrix& b) {
  check_hpd_input(a);
  if (b.rows() != a.rows()) throw Error(ErrorKind::Shape, "right-hand side does not conform");
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "matrix is not positive definite");
  ComplexMatrix x = llt.solve(Eigen::MatrixXcd(b));
  if (!x.allFinite()) throw Error(ErrorKind::NumericalFailure, "non-finite solution");
  return x;
}

ComplexMatrix hpd_inverse(const ComplexMatrix& a) {
  return hpd_solve(a, ComplexMatrix::Identity(a.rows(), a.cols()));
}

ComplexVector vec(const ComplexMatrix& m) {
  ComplexVector v(m.size());
  Eigen::Index idx = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) v(idx++) = m(r, c);
  }
  return v;
}

ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw Error(ErrorKind::Shape, "unvec length mismatch");
  ComplexMatrix m(rows, cols);
  Eigen::Index idx = 0;
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = v(idx++);
  }
  return m;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

double hermitian_defect(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - std::conj(a(j, i))));
  }
  return worst;
}

}  // namespace xlmimo
