#include <set>
#include <vector>

#include "support.hpp"

using namespace xlmimo;
using namespace xlmimo::test;

TEST_SUITE("numerics") {

TEST_CASE("dft small sizes") {
  const ComplexMatrix f1 = unitary_dft(1);
  CHECK(f1.rows() == 1);
  CHECK(std::abs(f1(0, 0) - cd(1.0, 0.0)) < 1e-15);

  const ComplexMatrix f2 = unitary_dft(2);
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(f2(0, 0) - s) < 1e-15);
  CHECK(std::abs(f2(0, 1) - s) < 1e-15);
  CHECK(std::abs(f2(1, 0) - s) < 1e-15);
  CHECK(std::abs(f2(1, 1) + s) < 1e-15);

  ComplexMatrix diff = unitary_dft(4) * unitary_dft(4).adjoint() - ComplexMatrix::Identity(4, 4);
  CHECK(diff.norm() < 1e-12);
}

TEST_CASE("dft entries and unitarity up to 256") {
  for (Eigen::Index n = 1; n <= 256; n *= 2) {
    const ComplexMatrix f = unitary_dft(n);
    const ComplexMatrix d = f * f.adjoint() - ComplexMatrix::Identity(n, n);
    CHECK(d.cwiseAbs().maxCoeff() < 1e-12);
  }
  const Eigen::Index n = 6;
  const ComplexMatrix f = unitary_dft(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const cd want = std::exp(cd(0.0, -2.0 * kPi * static_cast<double>(j * k) / n)) / std::sqrt(6.0);
      CHECK(std::abs(f(j, k) - want) < 1e-14);
    }
  }
}

TEST_CASE("dft rejects zero size") {
  CHECK(error_kind_of([] { unitary_dft(0); }) == ErrorKind::InvalidDimension);
}

TEST_CASE("hadamard with two antennas") {
  const double s = 1.0 / std::sqrt(2.0);
  std::set<std::vector<double>> seen;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const ComplexMatrix w = hadamard_combiner(2, 1, 2, Seed{seed});
    REQUIRE(w.rows() == 2);
    std::set<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < 2; ++r) rows.insert({w(r, 0).real(), w(r, 1).real()});
    CHECK(rows == std::set<std::vector<double>>{{s, s}, {s, -s}});
    seen.insert({w(0, 0).real(), w(0, 1).real()});
  }
  // The order depends on the seed, so both rows show up first at some point.
  CHECK(seen.size() == 2);
}

TEST_CASE("hadamard entries, orthogonality and slot blocks") {
  const ComplexMatrix w = hadamard_combiner(16, 2, 4, Seed{11});
  REQUIRE(w.rows() == 8);
  REQUIRE(w.cols() == 16);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    CHECK(std::abs(std::abs(w.data()[i].real()) - 0.25) < 1e-15);
    CHECK(w.data()[i].imag() == 0.0);
  }
  CHECK((w * w.adjoint() - ComplexMatrix::Identity(8, 8)).norm() < 1e-12);
  for (Eigen::Index p = 0; p < 4; ++p) {
    const ComplexMatrix block = w.middleRows(2 * p, 2);
    CHECK((block * block.adjoint() - ComplexMatrix::Identity(2, 2)).norm() < 1e-12);
  }
}

TEST_CASE("hadamard preconditions") {
  CHECK(error_kind_of([] { hadamard_combiner(12, 1, 2, Seed{1}); }) == ErrorKind::UnsupportedDimension);
  CHECK(error_kind_of([] { hadamard_combiner(8, 3, 3, Seed{1}); }) == ErrorKind::InsufficientRows);
}

TEST_CASE("complex gaussian sampling") {
  CHECK(sample_cgaussian(3, 4, 0.0, Seed{5}).norm() == 0.0);
  CHECK(sample_cgaussian(3, 4, 1.0, Seed{5}) == sample_cgaussian(3, 4, 1.0, Seed{5}));
  CHECK(sample_cgaussian(3, 4, 1.0, Seed{5}) != sample_cgaussian(3, 4, 1.0, Seed{6}));
  CHECK(error_kind_of([] { sample_cgaussian(2, 2, -1.0, Seed{1}); }) == ErrorKind::InvalidParameter);

  // E|z|^2 = 2 and Var|z|^2 = 4 for CN(0, 2); 1e5 samples.
  const ComplexMatrix z = sample_cgaussian(1000, 100, 2.0, Seed{99});
  const double n = static_cast<double>(z.size());
  const double ms = z.squaredNorm() / n;
  CHECK(std::abs(ms - 2.0) < 3.0 * std::sqrt(4.0 / n));
  const double re_var = z.real().squaredNorm() / n;
  CHECK(std::abs(re_var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("hpd solve") {
  Rng rng(Seed{3});
  const ComplexMatrix b = random_matrix(5, 3, rng);
  CHECK(rel_err(hpd_solve(ComplexMatrix::Identity(5, 5), b), b) < 1e-15);
  CHECK(rel_err(hpd_solve(2.0 * ComplexMatrix::Identity(5, 5), b), 0.5 * b) < 1e-15);

  const ComplexMatrix a = random_hpd(8, rng);
  const ComplexMatrix rhs = random_matrix(8, 2, rng);
  const ComplexMatrix x = hpd_solve(a, rhs);
  CHECK((a * x - rhs).norm() / rhs.norm() < 1e-10);

  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix m = random_hpd(10, rng);
    const ComplexMatrix x0 = random_matrix(10, 3, rng);
    CHECK(rel_err(hpd_solve(m, m * x0), x0) < 1e-9);
  }
}

TEST_CASE("hpd solve failures") {
  ComplexMatrix a = ComplexMatrix::Identity(3, 3);
  a(0, 1) = cd(0.5, 0.0);
  CHECK(error_kind_of([&] { hpd_solve(a, ComplexMatrix::Identity(3, 1)); }) == ErrorKind::NumericalFailure);
  ComplexMatrix indefinite = ComplexMatrix::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  CHECK(error_kind_of([&] { hpd_solve(indefinite, ComplexMatrix::Identity(3, 1)); }) ==
        ErrorKind::NumericalFailure);
  CHECK(error_kind_of([] { hpd_solve(ComplexMatrix::Identity(3, 3), ComplexMatrix::Identity(2, 2)); }) ==
        ErrorKind::Shape);
}

TEST_CASE("vec, unvec and kron") {
  Rng rng(Seed{4});
  const ComplexMatrix x = random_matrix(3, 4, rng);
  const ComplexVector v = vec(x);
  CHECK(v(1) == x(1, 0));
  CHECK(v(3) == x(0, 1));
  CHECK(unvec(v, 3, 4) == x);

  // vec(A X B) = (B^T (x) A) vec(X)
  const ComplexMatrix a = random_matrix(2, 3, rng);
  const ComplexMatrix b = random_matrix(4, 2, rng);
  CHECK(rel_err(kron(b.transpose(), a) * v, vec(a * x * b)) < 1e-13);
}

TEST_CASE("derived seeds") {
  const Seed master{42};
  CHECK(derive_seed(master, {1, 2}) == derive_seed(master, {1, 2}));
  std::set<std::uint64_t> values;
  for (std::uint64_t t = 0; t < 50; ++t) {
    for (std::uint64_t m = 0; m < 8; ++m) values.insert(derive_seed(master, {t, m}).value);
  }
  CHECK(values.size() == 400);
  CHECK(!(derive_seed(master, {1, 2}) == derive_seed(master, {2, 1})));
  CHECK(!(derive_seed(Seed{1}, {0}) == derive_seed(Seed{2}, {0})));
}

}
