#include "xlmimo/refine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xlmimo {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

MarkovPrior MarkovPrior::from_sparsity(double rho, double p10) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorKind::InvalidParameter, "sparsity must lie in (0,1)");
  MarkovPrior m;
  m.p10 = p10;
  m.p01 = rho * p10 / (1.0 - rho);
  m.validate();
  return m;
}

void MarkovPrior::validate() const {
  if (!is_probability(p01) || !is_probability(p10)) {
    throw Error(ErrorKind::InvalidParameter, "transition probabilities must lie in [0,1]");
  }
  if (!(a > 0.0 && b > 0.0 && a_bar > 0.0 && b_bar > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "Gamma shape/rate parameters must be positive");
  }
}

ComplexVector fuse(const std::vector<ComplexMatrix>& local_angular, const SystemConfig& cfg) {
  if (static_cast<Eigen::Index>(local_angular.size()) != cfg.m_sub) {
    throw Error(ErrorKind::Shape, "expected " + std::to_string(cfg.m_sub) + " local estimates, got " +
                                      std::to_string(local_angular.size()));
  }
  const Eigen::Index n = cfg.n_sub();
  const ComplexMatrix f_a = unitary_dft(cfg.n_t);
  const ComplexMatrix f_l_h = unitary_dft(n).adjoint();
  ComplexMatrix global = ComplexMatrix::Zero(cfg.n_t, cfg.k_sc);
  for (Eigen::Index m = 0; m < cfg.m_sub; ++m) {
    const ComplexMatrix& local = local_angular[static_cast<std::size_t>(m)];
    if (local.rows() != n || local.cols() != cfg.k_sc) throw Error(ErrorKind::Shape, "local estimate shape mismatch");
    global += f_a.middleCols(m * n, n) * (f_l_h * local);
  }
  return vec(global);
}

ComplexVector global_angular_delay(const ComplexMatrix& h) {
  return vec(unitary_dft(h.rows()) * h * unitary_dft(h.cols()).adjoint());
}

RealVector msg_pi_out(const ComplexVector& x_tilde, const RealVector& tau_tilde, const MarkovPrior& prior,
                      bool exact) {
  RealVector pi(x_tilde.size());
  for (Eigen::Index j = 0; j < pi.size(); ++j) {
    const double s = std::norm(x_tilde(j)) + tau_tilde(j);
    if (exact) {
      // Evidence of u * exp(-u s) under Ga(a, b): a b^a / (b + s)^(a + 1).
      const double log_on = std::log(prior.a) + prior.a * std::log(prior.b) - (prior.a + 1.0) * std::log(prior.b + s);
      const double log_off = std::log(prior.a_bar) + prior.a_bar * std::log(prior.b_bar) -
                             (prior.a_bar + 1.0) * std::log(prior.b_bar + s);
      pi(j) = 1.0 / (1.0 + std::exp(log_off - log_on));
    } else {
      const double on = prior.a * (prior.b_bar + s);
      const double off = prior.a_bar * (prior.b + s);
      pi(j) = on / (on + off);
    }
  }
  return pi;
}

ChainMessages chain_forward_backward(const RealVector& pi_out, const MarkovPrior& prior) {
  const Eigen::Index len = pi_out.size();
  ChainMessages msg;
  msg.psi_f.resize(len);
  msg.psi_b.resize(len);
  msg.pi_in.resize(len);
  if (len == 0) return msg;

  const double p01 = prior.p01;
  const double p10 = prior.p10;
  const double p11 = prior.p11();
  const double p0 = p10 + prior.p00();
  const double p1 = p11 + p01;

  msg.psi_f(0) = prior.stationary();
  for (Eigen::Index j = 1; j < len; ++j) {
    const double off = (1.0 - msg.psi_f(j - 1)) * (1.0 - pi_out(j - 1));
    const double on = msg.psi_f(j - 1) * pi_out(j - 1);
    const double den = off + on;
    msg.psi_f(j) = den > 0.0 ? (p01 * off + p11 * on) / den : msg.psi_f(j - 1);
  }

  msg.psi_b(len - 1) = 0.5;
  for (Eigen::Index j = len - 2; j >= 0; --j) {
    const double off = (1.0 - msg.psi_b(j + 1)) * (1.0 - pi_out(j + 1));
    const double on = msg.psi_b(j + 1) * pi_out(j + 1);
    const double den = p0 * off + p1 * on;
    msg.psi_b(j) = den > 0.0 ? (p10 * off + p11 * on) / den : msg.psi_b(j + 1);
  }

  for (Eigen::Index j = 0; j < len; ++j) {
    const double on = msg.psi_f(j) * msg.psi_b(j);
    const double off = (1.0 - msg.psi_f(j)) * (1.0 - msg.psi_b(j));
    msg.pi_in(j) = on + off > 0.0 ? on / (on + off) : msg.psi_f(j);
  }
  return msg;
}

RealVector update_upsilon(const RealVector& pi_in, const ComplexVector& x_tilde, const RealVector& tau_tilde,
                          const MarkovPrior& prior) {
  RealVector up(pi_in.size());
  for (Eigen::Index j = 0; j < up.size(); ++j) {
    const double s = std::norm(x_tilde(j)) + tau_tilde(j);
    const double v = pi_in(j) * (prior.a + 1.0) / (prior.b + s) +
                     (1.0 - pi_in(j)) * (prior.a_bar + 1.0) / (prior.b_bar + s);
    up(j) = kUpsilonClamp.apply(v);
  }
  return up;
}

XUpdate update_x(const ComplexVector& r, double kappa_tilde, const RealVector& upsilon_tilde) {
  if (!(kappa_tilde > 0.0)) throw Error(ErrorKind::InvalidParameter, "kappa must be positive");
  XUpdate out;
  out.x_tilde.resize(r.size());
  out.tau_tilde.resize(r.size());
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    const double den = kappa_tilde + upsilon_tilde(j);
    out.x_tilde(j) = r(j) * (kappa_tilde / den);
    out.tau_tilde(j) = 1.0 / den;
  }
  return out;
}

double update_kappa(const ComplexVector& r, const ComplexVector& x_tilde, const RealVector& tau_tilde) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < r.size(); ++j) sum += std::norm(r(j) - x_tilde(j)) + tau_tilde(j);
  return static_cast<double>(r.size()) / sum;
}

RefineResult run_refinement(const ComplexVector& r, const MarkovPrior& prior, const RefineOptions& opts,
                            const RefineObserver& observer) {
  if (opts.max_iter < 1) throw Error(ErrorKind::InvalidParameter, "need at least one refinement iteration");
  prior.validate();
  const Eigen::Index n = r.size();
  RefineResult res;
  RefineState& st = res.state;
  st.x_tilde = ComplexVector::Zero(n);
  st.tau_tilde = RealVector::Ones(n);
  st.upsilon_tilde = RealVector::Ones(n);
  st.kappa_tilde = 1.0;

  for (int it = 1; it <= opts.max_iter; ++it) {
    const ComplexVector prev = st.x_tilde;
    st.pi_out = msg_pi_out(st.x_tilde, st.tau_tilde, prior, opts.exact_pi_out);
    ChainMessages chain = chain_forward_backward(st.pi_out, prior);
    st.psi_f = std::move(chain.psi_f);
    st.psi_b = std::move(chain.psi_b);
    st.pi_in = std::move(chain.pi_in);
    st.upsilon_tilde = update_upsilon(st.pi_in, st.x_tilde, st.tau_tilde, prior);
    XUpdate xu = update_x(r, st.kappa_tilde, st.upsilon_tilde);
    st.x_tilde = std::move(xu.x_tilde);
    st.tau_tilde = std::move(xu.tau_tilde);
    st.kappa_tilde = update_kappa(r, st.x_tilde, st.tau_tilde);
    res.iterations = it;
    if (observer) observer(st);

    const double base = std::max(prev.norm(), 1e-12);
    if ((st.x_tilde - prev).norm() / base < opts.tol) break;
  }
  res.x = st.x_tilde;
  return res;
}

MarkovSignal sample_markov_signal(Eigen::Index n, const MarkovPrior& prior, Seed seed) {
  prior.validate();
  Rng rng(seed);
  MarkovSignal out;
  out.x.resize(n);
  out.precision.resize(n);
  out.active.resize(static_cast<std::size_t>(n));
  bool on = false;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double p_on = j == 0 ? prior.stationary() : (on ? prior.p11() : prior.p01);
    on = rng.uniform(0.0, 1.0) < p_on;
    const double shape = on ? prior.a : prior.a_bar;
    const double rate = on ? prior.b : prior.b_bar;
    const double u = std::gamma_distribution<double>(shape, 1.0 / rate)(rng.engine());
    out.active[static_cast<std::size_t>(j)] = on;
    out.precision(j) = u;
    out.x(j) = rng.cgaussian(1.0 / u);
  }
  return out;
}

Reconstruction reconstruct(const ComplexVector& x_tilde, const SystemConfig& cfg) {
  if (x_tilde.size() != cfg.n_t * cfg.k_sc) throw Error(ErrorKind::Shape, "refined vector length mismatch");
  Reconstruction out;
  out.h = unitary_dft(cfg.n_t).adjoint() * unvec(x_tilde, cfg.n_t, cfg.k_sc) * unitary_dft(cfg.k_sc);
  for (Eigen::Index m = 0; m < cfg.m_sub; ++m) out.slices.push_back(subarray_slice(out.h, m, cfg));
  return out;
}

}  // namespace xlmimo
