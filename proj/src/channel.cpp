#include "xlmimo/channel.hpp"

#include <cmath>
#include <string>

namespace xlmimo {

void SystemConfig::validate() const {
  if (n_t < 1 || m_sub < 1 || k_sc < 1 || n_rf < 1 || p_slots < 1) {
    throw Error(ErrorKind::InvalidDimension, "system dimensions must be positive");
  }
  if (n_t % m_sub != 0) {
    throw Error(ErrorKind::InvalidDimension,
                "n_t=" + std::to_string(n_t) + " is not divisible by m_sub=" + std::to_string(m_sub));
  }
  if (!(f_c > 0.0) || !(f_s >= 0.0)) throw Error(ErrorKind::InvalidParameter, "frequencies must be positive");
}

PathParams make_path(cd alpha, double theta, double r, const SystemConfig& cfg) {
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidParameter, "path distance must be positive");
  const double d = cfg.spacing();
  const double lambda = cfg.wavelength();
  const double s = std::sin(theta);
  PathParams p;
  p.alpha = alpha;
  p.theta = theta;
  p.r = r;
  p.tau = r / kSpeedOfLight;
  p.psi = d * std::cos(theta) / lambda;
  p.phi = d * d * s * s / (2.0 * r * lambda);
  return p;
}

std::vector<PathParams> draw_paths(const SystemConfig& cfg, Eigen::Index g_paths, Seed seed, const PathLaw& law) {
  if (g_paths < 1) throw Error(ErrorKind::InvalidParameter, "need at least one path");
  if (!(law.r_min > 0.0) || law.r_max < law.r_min) throw Error(ErrorKind::InvalidParameter, "bad distance range");
  Rng rng(seed);
  const double gain_var = 1.0 / static_cast<double>(g_paths);
  std::vector<PathParams> paths;
  paths.reserve(static_cast<std::size_t>(g_paths));
  for (Eigen::Index g = 0; g < g_paths; ++g) {
    const double theta = rng.uniform(-kPi / 2.0, kPi / 2.0);
    const double r = rng.uniform(law.r_min, law.r_max);
    const cd alpha = rng.cgaussian(gain_var);
    paths.push_back(make_path(alpha, theta, r, cfg));
  }
  return paths;
}

ComplexVector steering_freq(double tau, const SystemConfig& cfg) {
  ComplexVector a(cfg.k_sc);
  for (Eigen::Index k = 0; k < cfg.k_sc; ++k) a(k) = std::polar(1.0, -2.0 * kPi * cfg.subcarrier(k) * tau);
  return a;
}

ComplexVector steering_space(double psi, double phi, const SystemConfig& cfg) {
  ComplexVector b(cfg.n_t);
  for (Eigen::Index j = 0; j < cfg.n_t; ++j) {
    const double jj = static_cast<double>(j);
    b(j) = std::polar(1.0, -2.0 * kPi * (psi * jj - phi * jj * jj));
  }
  return b;
}

ComplexMatrix phase_shift_matrix(double psi, double phi, const SystemConfig& cfg) {
  ComplexMatrix theta(cfg.n_t, cfg.k_sc);
  for (Eigen::Index j = 0; j < cfg.n_t; ++j) {
    const double jj = static_cast<double>(j);
    const double spatial = (jj * psi - jj * jj * phi) / cfg.f_c;
    for (Eigen::Index k = 0; k < cfg.k_sc; ++k) {
      theta(j, k) = std::polar(1.0, -2.0 * kPi * cfg.subcarrier(k) * spatial);
    }
  }
  return theta;
}

ChannelRealization assemble_channel(const std::vector<PathParams>& paths, const SystemConfig& cfg) {
  if (paths.empty()) throw Error(ErrorKind::InvalidParameter, "cannot assemble a channel without paths");
  ChannelRealization out;
  out.h = ComplexMatrix::Zero(cfg.n_t, cfg.k_sc);
  for (const auto& p : paths) {
    const ComplexVector b = steering_space(p.psi, p.phi, cfg);
    const ComplexVector a = steering_freq(p.tau, cfg);
    const ComplexMatrix theta = phase_shift_matrix(p.psi, p.phi, cfg);
    const ComplexMatrix outer = b * a.transpose();
    out.h += p.alpha * outer.cwiseProduct(theta);
  }
  out.paths = paths;
  return out;
}

ComplexMatrix subarray_slice(const ComplexMatrix& h, Eigen::Index subarray, const SystemConfig& cfg) {
  if (subarray < 0 || subarray >= cfg.m_sub) {
    throw Error(ErrorKind::Index, "subarray " + std::to_string(subarray) + " out of range [0," +
                                      std::to_string(cfg.m_sub) + ")");
  }
  if (h.rows() != cfg.n_t) throw Error(ErrorKind::Shape, "channel row count does not match n_t");
  return h.middleRows(subarray * cfg.n_sub(), cfg.n_sub());
}

}  // namespace xlmimo
