#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

#include "xlmimo/error.hpp"

namespace xlmimo {

using cd = std::complex<double>;

// Row-major so that the in-memory order is the one written to disk.
using ComplexMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

struct ClampBounds {
  double lo;
  double hi;
  double apply(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

struct Seed {
  std::uint64_t value = 0;
  friend bool operator==(Seed, Seed) = default;
};

/// Mixes a master seed with a tuple of stream coordinates (trial, subarray, ...).
/// Distinct tuples give statistically independent, reproducible streams.
Seed derive_seed(Seed master, std::initializer_list<std::uint64_t> coords);

/// Random engine bound to one seed. Not shared across tasks.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed.value) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double stddev) { return std::normal_distribution<double>(0.0, stddev)(engine_); }
  /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  cd cgaussian(double variance);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

ComplexMatrix unitary_dft(Eigen::Index n);

/// Q = n_rf * n_slots distinct, randomly chosen rows of the order-N Sylvester
/// Hadamard matrix scaled by 1/sqrt(N). Every n_rf-row slot block is semi-unitary.
ComplexMatrix hadamard_combiner(Eigen::Index n_antennas, Eigen::Index n_rf, Eigen::Index n_slots, Seed seed);

ComplexMatrix sample_cgaussian(Eigen::Index rows, Eigen::Index cols, double variance, Seed seed);

/// Solves A X = B for Hermitian positive definite A via Cholesky.
ComplexMatrix hpd_solve(const ComplexMatrix& a, const ComplexMatrix& b);

/// Inverse of a Hermitian positive definite matrix (same checks as hpd_solve).
ComplexMatrix hpd_inverse(const ComplexMatrix& a);

/// Column stacking.
ComplexVector vec(const ComplexMatrix& m);
ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// Largest |A_ij - conj(A_ji)|.
double hermitian_defect(const ComplexMatrix& a);

}  // namespace xlmimo
