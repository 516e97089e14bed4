#pragma once

#include <span>

namespace blowup {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_sum_squares = 0.0;
};

/// Ordinary least squares y ~ intercept + slope * x. Requires at least two distinct abscissae.
[[nodiscard]] LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Minimises a unimodal function on [lower, upper] by golden-section search.
template <class F>
[[nodiscard]] double golden_section_minimum(F&& objective, double lower, double upper, int iterations = 200) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lower;
  double b = upper;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int i = 0; i < iterations && b - a > 1e-15 * (1.0 + (a < 0 ? -a : a)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace blowup
