#include <limits>

#include "support.hpp"
#include "xlmimo/measurement.hpp"

using namespace xlmimo;
using namespace xlmimo::test;

namespace {

// Entry-by-entry Kronecker product, independent of the library's kron.
ComplexMatrix kron_oracle(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = a(i / b.rows(), j / b.cols()) * b(i % b.rows(), j % b.cols());
    }
  }
  return out;
}

ComplexMatrix dft_oracle(Eigen::Index n) {
  ComplexMatrix f(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      f(j, k) = std::exp(cd(0.0, -2.0 * kPi * static_cast<double>(j * k) / static_cast<double>(n))) /
                std::sqrt(static_cast<double>(n));
    }
  }
  return f;
}

}  // namespace

TEST_SUITE("measurement") {

TEST_CASE("noiseless acquisition") {
  Rng rng(Seed{1});
  const ComplexMatrix h = random_matrix(8, 4, rng);
  const ComplexMatrix w = hadamard_combiner(8, 1, 4, Seed{2});
  const ComplexMatrix y = acquire(h, w, std::numeric_limits<double>::infinity(), Seed{3});
  CHECK((y - w * h).norm() == 0.0);
  CHECK(acquire(h, w, 2.0, Seed{3}) == acquire(h, w, 2.0, Seed{3}));
  CHECK(error_kind_of([&] { acquire(h, ComplexMatrix::Identity(4, 6), 1.0, Seed{1}); }) == ErrorKind::Shape);
  CHECK(error_kind_of([&] { acquire(h, w, 0.0, Seed{1}); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("noise variance with identity combiner") {
  Rng rng(Seed{4});
  const ComplexMatrix h = random_matrix(16, 500, rng);
  const double zeta = 4.0;
  const ComplexMatrix y = acquire(h, ComplexMatrix::Identity(16, 16), zeta, Seed{5});
  const double n = static_cast<double>(h.size());
  const double var = (y - h).squaredNorm() / n;
  // |n|^2 ~ Exp(mean 1/zeta): standard error (1/zeta)/sqrt(n).
  CHECK(std::abs(var - 1.0 / zeta) < 3.0 * (1.0 / zeta) / std::sqrt(n));
}

TEST_CASE("noise energy scales as QK/zeta") {
  Rng rng(Seed{6});
  const ComplexMatrix h = random_matrix(16, 8, rng);
  const ComplexMatrix w = hadamard_combiner(16, 1, 8, Seed{7});
  const double zeta = 0.5;
  const int draws = 400;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    acc += (acquire(h, w, zeta, Seed{static_cast<std::uint64_t>(1000 + i)}) - w * h).squaredNorm();
  }
  const double mean = acc / draws;
  const double expect = 8.0 * 8.0 / zeta;
  // Sum of 64 Exp(1/zeta) terms has standard deviation sqrt(64)/zeta.
  CHECK(std::abs(mean - expect) < 3.0 * (8.0 / zeta) / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("vectorized problem definition round-trip") {
  Rng rng(Seed{8});
  const ComplexMatrix h = random_matrix(8, 4, rng);
  const ComplexMatrix y = h;  // W = I, noiseless
  const SparseProblem p = vectorize_problem(y, ComplexMatrix::Identity(8, 8), 4, 1.0);
  const ComplexVector x = vec(dft_oracle(8) * h * dft_oracle(4).adjoint());
  CHECK((p.y - p.phi * x).norm() < 1e-10);
  CHECK((angular_delay(h) - x).norm() < 1e-12);
}

TEST_CASE("single subcarrier operator") {
  const ComplexMatrix w = hadamard_combiner(8, 1, 4, Seed{9});
  const SparseProblem p = vectorize_problem(ComplexMatrix::Zero(4, 1), w, 1, 1.0);
  CHECK((p.phi - w * dft_oracle(8).adjoint()).norm() < 1e-13);
}

TEST_CASE("operator matches brute-force Kronecker assembly") {
  Rng rng(Seed{10});
  const ComplexMatrix w = random_matrix(2, 2, rng);
  const ComplexMatrix phi = measurement_operator(w, 2);
  const ComplexMatrix want = kron_oracle(dft_oracle(2).transpose(), w * dft_oracle(2).adjoint());
  CHECK((phi - want).cwiseAbs().maxCoeff() < 1e-14);

  const ComplexMatrix w2 = hadamard_combiner(8, 1, 4, Seed{11});
  const SparseProblem p = vectorize_problem(ComplexMatrix::Zero(4, 3), w2, 3, 1.0);
  const ComplexMatrix want2 = kron_oracle(dft_oracle(3).transpose(), w2 * dft_oracle(8).adjoint());
  CHECK((p.phi - want2).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((p.gram - want2.adjoint() * want2).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(p.block_size == 8);
}

TEST_CASE("noiseless model identity on generated problems") {
  SystemConfig cfg;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ComplexMatrix h = subarray_slice(assemble_channel(draw_paths(cfg, 4, Seed{s}), cfg).h, 1, cfg);
    const ComplexMatrix w = hadamard_combiner(16, 1, 8, Seed{s + 10});
    const ComplexMatrix y = acquire(h, w, std::numeric_limits<double>::infinity(), Seed{0});
    const SparseProblem p = vectorize_problem(y, w, cfg.k_sc, 1.0, angular_delay(h));
    CHECK((p.y - p.phi * *p.x_true).norm() < 1e-10);
  }
}

TEST_CASE("problem shape errors") {
  CHECK(error_kind_of([] { vectorize_problem(ComplexMatrix::Zero(4, 3), ComplexMatrix::Zero(5, 8), 3, 1.0); }) ==
        ErrorKind::Shape);
  CHECK(error_kind_of([] { vectorize_problem(ComplexMatrix::Zero(4, 3), ComplexMatrix::Zero(4, 8), 2, 1.0); }) ==
        ErrorKind::Shape);
  CHECK(error_kind_of([] { make_problem(ComplexVector::Zero(3), ComplexMatrix::Zero(4, 2), 1.0); }) ==
        ErrorKind::Shape);
}

TEST_CASE("noise calibration") {
  // |W H|^2 = Q M K (here Q K with one block) at 0 dB gives zeta = 1.
  const ComplexMatrix w = ComplexMatrix::Identity(4, 4);
  const ComplexMatrix h = ComplexMatrix::Ones(4, 3);
  CHECK(calibrate_noise(h, w, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(calibrate_noise(h, w, 10.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(calibrate_noise(2.0 * h, w, 0.0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(error_kind_of([&] { calibrate_noise(ComplexMatrix::Zero(4, 3), w, 0.0); }) == ErrorKind::Division);

  // Empirical SNR over 500 draws within 0.2 dB of the 5 dB target.
  SystemConfig cfg;
  const ComplexMatrix hh = assemble_channel(draw_paths(cfg, 4, Seed{1}), cfg).h;
  std::vector<ComplexMatrix> ws;
  for (Eigen::Index m = 0; m < cfg.m_sub; ++m) ws.push_back(hadamard_combiner(16, 1, 8, Seed{20 + static_cast<std::uint64_t>(m)}));
  const ComplexMatrix wb = block_diagonal(ws);
  const double zeta = calibrate_noise(hh, wb, 5.0);
  const ComplexMatrix clean = wb * hh;
  double noise = 0.0;
  for (int i = 0; i < 500; ++i) noise += (acquire(hh, wb, zeta, Seed{static_cast<std::uint64_t>(i)}) - clean).squaredNorm();
  const double snr = 10.0 * std::log10(clean.squaredNorm() / (noise / 500.0));
  CHECK(std::abs(snr - 5.0) < 0.2);
}

TEST_CASE("block diagonal assembly") {
  const ComplexMatrix a = ComplexMatrix::Constant(2, 3, 1.0);
  const ComplexMatrix b = ComplexMatrix::Constant(1, 2, 2.0);
  const ComplexMatrix d = block_diagonal({a, b});
  CHECK(d.rows() == 3);
  CHECK(d.cols() == 5);
  CHECK(d.block(0, 0, 2, 3) == a);
  CHECK(d.block(2, 3, 1, 2) == b);
  CHECK(d.block(0, 3, 2, 2).norm() == 0.0);
  CHECK(d.block(2, 0, 1, 3).norm() == 0.0);
}

}
