#include "xlmimo/sbl.hpp"

#include <cmath>
#include <string>

namespace xlmimo {

PosteriorState e_step(const SparseProblem& prob, const PriorState& prior) {
  const Eigen::Index n = prob.n();
  if (prior.gamma.size() != n) throw Error(ErrorKind::Shape, "gamma length does not match problem size");
  if (!(prior.zeta > 0.0) || !(prior.gamma.minCoeff() > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "gamma and zeta must be positive");
  }
  PosteriorState post;
  post.v = prior.zeta * prob.gram;
  post.v.diagonal() += prior.gamma.cast<cd>();

  const ComplexVector rhs = prior.zeta * prob.phi_h_y;
  const Eigen::Index nb = prob.block_size;
  if (nb > 0 && n % nb == 0) {
    post.sigma = ComplexMatrix::Zero(n, n);
    post.mu.resize(n);
    for (Eigen::Index k = 0; k < n / nb; ++k) {
      ComplexMatrix sk = hpd_inverse(post.v.block(k * nb, k * nb, nb, nb));
      // Symmetrize away round-off so downstream Hermitian checks see an exact Hermitian matrix.
      sk = (0.5 * (sk + sk.adjoint())).eval();
      post.mu.segment(k * nb, nb) = sk * rhs.segment(k * nb, nb);
      post.sigma.block(k * nb, k * nb, nb, nb) = sk;
    }
  } else {
    post.sigma = hpd_inverse(post.v);
    post.sigma = (0.5 * (post.sigma + post.sigma.adjoint())).eval();
    post.mu = post.sigma * rhs;
  }
  return post;
}

RealVector m_step_std(const PosteriorState& post) {
  RealVector gamma(post.mu.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double second_moment = std::norm(post.mu(i)) + post.sigma(i, i).real();
    gamma(i) = second_moment > 0.0 ? kGammaClamp.apply(1.0 / second_moment) : kGammaClamp.hi;
  }
  return gamma;
}

double update_noise(const PosteriorState& post, const SparseProblem& prob) {
  const double residual = (prob.y - prob.phi * post.mu).squaredNorm();
  // trace(phi sigma phi^H) = sum_ij gram_ij sigma_ji
  double trace = 0.0;
  const Eigen::Index nb = prob.block_size;
  if (nb > 0 && prob.n() % nb == 0) {
    for (Eigen::Index k = 0; k < prob.n() / nb; ++k) {
      trace += prob.gram.block(k * nb, k * nb, nb, nb)
                   .cwiseProduct(post.sigma.block(k * nb, k * nb, nb, nb).transpose())
                   .sum()
                   .real();
    }
  } else {
    trace = prob.gram.cwiseProduct(post.sigma.transpose()).sum().real();
  }
  const double denom = residual + trace;
  if (!(denom > 0.0)) return kZetaClamp.hi;
  return kZetaClamp.apply(static_cast<double>(prob.m()) / denom);
}

RealVector StdSblUpdater::update(const PosteriorState& post, const PriorState& /*prior*/) {
  return m_step_std(post);
}

RealVector FrozenUpdater::update(const PosteriorState& /*post*/, const PriorState& prior) { return prior.gamma; }

SblResult run_sbl(const SparseProblem& prob, PriorUpdater& updater, const SblOptions& opts) {
  if (opts.iterations < 1) throw Error(ErrorKind::InvalidParameter, "need at least one SBL iteration");
  SblResult res;
  res.prior.gamma = RealVector::Ones(prob.n());
  res.prior.zeta = kZetaClamp.apply(opts.zeta_init > 0.0 ? opts.zeta_init : prob.zeta_true);
  updater.reset(prob);

  PosteriorState post = e_step(prob, res.prior);
  for (int t = 1; t <= opts.iterations; ++t) {
    res.prior.gamma = updater.update(post, res.prior);
    if (opts.refresh_noise) res.prior.zeta = update_noise(post, prob);
    ComplexVector prev = std::move(post.mu);
    post = e_step(prob, res.prior);
    res.iterations = t;
    if (opts.tol > 0.0) {
      const double base = prev.norm();
      if (base > 0.0 && (post.mu - prev).norm() / base < opts.tol) break;
    }
  }
  res.mu = std::move(post.mu);
  return res;
}

}  // namespace xlmimo
