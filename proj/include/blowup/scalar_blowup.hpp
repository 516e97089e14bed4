#pragma once

#include "blowup/nonlinearity.hpp"
#include "blowup/ode.hpp"
#include "blowup/trajectory.hpp"

namespace blowup {

/// Closed-form solution u(t) = Phi^{-1}(lambda (T_inf - t)) of u' = lambda f(u), u(0) = u0.
struct BlowupSolution {
  ForcingLaw law;
  double u0;
  double T_inf;

  [[nodiscard]] double operator()(double t) const;
};

[[nodiscard]] double blowup_time(const ForcingLaw& law, double u0);
[[nodiscard]] BlowupSolution closed_trajectory(const ForcingLaw& law, double u0);

struct BlowupOptions {
  double cap = 1e8;
  /// Horizon beyond which growth counts as global; 0 selects 10 Phi(u0)/lambda.
  double horizon = 0.0;
  /// Horizon used when Phi(u0) does not exist.
  double fallback_horizon = 10.0;
  OdeOptions ode{1e-13, 1e-15};
};

struct BlowupIntegration {
  PiecewiseTrajectory samples;
  double T_est = 0.0;
  double fitted_rate = 0.0;  ///< -slope of Phi(u(t)) against t; recovers lambda
  int fit_samples = 0;
};

/// Integrates u' = lambda f(u) until u exceeds the cap and extrapolates the blow-up time from a
/// line fit of Phi(u(t)) over the last decade of growth.
[[nodiscard]] BlowupIntegration integrate_until_blowup(const ForcingLaw& law, double u0,
                                                       const BlowupOptions& options = {});

}  // namespace blowup
