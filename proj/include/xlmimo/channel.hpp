#pragma once

#include <vector>

#include "xlmimo/numerics.hpp"

namespace xlmimo {

inline constexpr double kSpeedOfLight = 2.99792458e8;

struct SystemConfig {
  Eigen::Index n_t = 64;     // antennas in the whole array
  Eigen::Index m_sub = 4;    // subarrays (LPUs)
  Eigen::Index k_sc = 8;     // pilot subcarriers
  double f_c = 30e9;         // carrier, Hz
  double f_s = 1.6e9;        // bandwidth, Hz
  Eigen::Index n_rf = 1;
  Eigen::Index p_slots = 8;

  Eigen::Index n_sub() const { return n_t / m_sub; }
  Eigen::Index q_beams() const { return n_rf * p_slots; }
  double wavelength() const { return kSpeedOfLight / f_c; }
  /// Half-wavelength element spacing.
  double spacing() const { return kSpeedOfLight / (2.0 * f_c); }
  double subcarrier(Eigen::Index k) const { return f_c + f_s * static_cast<double>(k); }

  /// Throws InvalidParameter / InvalidDimension on inconsistent fields.
  void validate() const;
};

struct PathParams {
  cd alpha{0.0, 0.0};
  double theta = 0.0;  // radians
  double r = 0.0;      // meters
  double tau = 0.0;    // seconds
  double psi = 0.0;
  double phi = 0.0;
};

/// Fills tau, psi and phi from (theta, r) for the given array.
PathParams make_path(cd alpha, double theta, double r, const SystemConfig& cfg);

struct PathLaw {
  double r_min = 10.0;
  double r_max = 50.0;
};

std::vector<PathParams> draw_paths(const SystemConfig& cfg, Eigen::Index g_paths, Seed seed,
                                   const PathLaw& law = {});

ComplexVector steering_freq(double tau, const SystemConfig& cfg);
ComplexVector steering_space(double psi, double phi, const SystemConfig& cfg);
ComplexMatrix phase_shift_matrix(double psi, double phi, const SystemConfig& cfg);

struct ChannelRealization {
  ComplexMatrix h;  // n_t x k_sc
  std::vector<PathParams> paths;
};

ChannelRealization assemble_channel(const std::vector<PathParams>& paths, const SystemConfig& cfg);

/// Rows [subarray*n_sub, (subarray+1)*n_sub) of H; subarray is zero-based.
ComplexMatrix subarray_slice(const ComplexMatrix& h, Eigen::Index subarray, const SystemConfig& cfg);

}  // namespace xlmimo
