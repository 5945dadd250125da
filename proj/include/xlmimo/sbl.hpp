#pragma once

#include <memory>

#include "xlmimo/measurement.hpp"

namespace xlmimo {

inline constexpr ClampBounds kGammaClamp{1e-6, 1e8};
inline constexpr ClampBounds kZetaClamp{1e-8, 1e12};

struct PosteriorState {
  ComplexVector mu;
  ComplexMatrix sigma;
  ComplexMatrix v;  // zeta * phi^H phi + diag(gamma), i.e. the inverse of sigma
};

struct PriorState {
  RealVector gamma;  // per-coefficient precision
  double zeta = 1.0;
};

PosteriorState e_step(const SparseProblem& prob, const PriorState& prior);

RealVector m_step_std(const PosteriorState& post);

double update_noise(const PosteriorState& post, const SparseProblem& prob);

/// Strategy for the M-step precision update. run_sbl calls reset() once per run,
/// then update() once per outer iteration.
class PriorUpdater {
 public:
  virtual ~PriorUpdater() = default;
  virtual void reset(const SparseProblem& /*prob*/) {}
  virtual RealVector update(const PosteriorState& post, const PriorState& prior) = 0;
};

class StdSblUpdater final : public PriorUpdater {
 public:
  RealVector update(const PosteriorState& post, const PriorState& prior) override;
};

/// Keeps gamma unchanged; turns run_sbl into ridge regression.
class FrozenUpdater final : public PriorUpdater {
 public:
  RealVector update(const PosteriorState& post, const PriorState& prior) override;
};

struct SblOptions {
  int iterations = 200;
  /// Early stop on relative change of mu; 0 disables.
  double tol = 1e-6;
  bool refresh_noise = true;
  /// Initial noise precision; <= 0 means "use the problem's calibrated value".
  double zeta_init = 0.0;
};

struct SblResult {
  ComplexVector mu;
  PriorState prior;
  int iterations = 0;
};

/// One E-step at gamma = 1, then `iterations` rounds of (updater, noise update, E-step).
SblResult run_sbl(const SparseProblem& prob, PriorUpdater& updater, const SblOptions& opts);

}  // namespace xlmimo
