#pragma once

#include <doctest.h>

#include "xlmimo/numerics.hpp"

namespace xlmimo::test {

inline ComplexMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double variance = 1.0) {
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.cgaussian(variance);
  return m;
}

inline ComplexVector random_vector(Eigen::Index n, Rng& rng, double variance = 1.0) {
  ComplexVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.cgaussian(variance);
  return v;
}

inline ComplexMatrix random_hpd(Eigen::Index n, Rng& rng) {
  const ComplexMatrix m = random_matrix(n, n, rng);
  ComplexMatrix a = m.adjoint() * m;
  a.diagonal().array() += 1.0;
  return 0.5 * (a + a.adjoint());
}

inline double rel_err(const ComplexMatrix& a, const ComplexMatrix& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an xlmimo::Error");
  return ErrorKind::Usage;
}

}  // namespace xlmimo::test
