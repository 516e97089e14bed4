#pragma once

#include <functional>

namespace blowup {

struct QuadratureOptions {
  double abs_tol = 0.0;
  double rel_tol = 1e-13;
  int max_intervals = 4000;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
};

using ScalarFunction = std::function<double(double)>;

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
[[nodiscard]] QuadratureResult integrate(const ScalarFunction& integrand, double lower, double upper,
                                         const QuadratureOptions& options = {});

/// Integral over [lower, inf) summed over dyadic panels with a geometric estimate of the remainder.
[[nodiscard]] QuadratureResult integrate_to_infinity(const ScalarFunction& integrand, double lower,
                                                     const QuadratureOptions& options = {});

/// True when the increments of the integral over [2^(k-1) r, 2^k r], k <= 60, stop decaying.
/// Used to detect a divergent tail before attempting the mapped integral.
[[nodiscard]] bool tail_diverges(const ScalarFunction& integrand, double lower);

}  // namespace blowup
