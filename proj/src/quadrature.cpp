#include "blowup/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace blowup {
namespace {

constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double lower;
  double upper;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel gauss_kronrod(const ScalarFunction& f, double lower, double upper) {
  const double center = 0.5 * (lower + upper);
  const double half = 0.5 * (upper - lower);
  const double f_center = f(center);
  double kronrod = kKronrodWeights[7] * f_center;
  double gauss = kGaussWeights[3] * f_center;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * sum;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {lower, upper, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace

QuadratureResult integrate(const ScalarFunction& integrand, double lower, double upper,
                           const QuadratureOptions& options) {
  if (lower == upper) return {0.0, 0.0, true};
  std::priority_queue<Panel> panels;
  Panel first = gauss_kronrod(integrand, lower, upper);
  double total = first.value;
  double error = first.error;
  panels.push(first);
  int count = 1;
  auto tolerance = [&] { return std::max(options.abs_tol, options.rel_tol * std::abs(total)); };
  while (error > tolerance() && count < options.max_intervals) {
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.lower + worst.upper);
    if (mid <= worst.lower || mid >= worst.upper) {
      panels.push(worst);
      break;
    }
    const Panel left = gauss_kronrod(integrand, worst.lower, mid);
    const Panel right = gauss_kronrod(integrand, mid, worst.upper);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++count;
  }
  // Re-sum to remove drift from incremental updates.
  double value = 0.0;
  double err = 0.0;
  while (!panels.empty()) {
    value += panels.top().value;
    err += panels.top().error;
    panels.pop();
  }
  const bool ok = std::isfinite(value) && err <= std::max(options.abs_tol, options.rel_tol * std::abs(value)) * 10.0;
  return {value, err, ok};
}

QuadratureResult integrate_to_infinity(const ScalarFunction& integrand, double lower,
                                       const QuadratureOptions& options) {
  // Dyadic panels [a, 2a] keep algebraic tails smooth on every panel; the remainder after the
  // last panel is extrapolated geometrically, which is exact for power-law tails.
  QuadratureOptions panel_options = options;
  panel_options.rel_tol = std::min(options.rel_tol, 1e-14);
  QuadratureResult total{0.0, 0.0, true};
  double left = lower;
  if (lower <= 0.0) {
    total = integrate(integrand, lower, 1.0, panel_options);
    left = 1.0;
  }
  double previous = 0.0;
  double last_ratio = 0.0;
  int quiet = 0;
  for (int k = 0; k < 1100; ++k) {
    const double right = 2.0 * left;
    if (!std::isfinite(right)) {
      if (last_ratio > 0.0 && last_ratio < 1.0) total.value += previous * last_ratio / (1.0 - last_ratio);
      break;
    }
    const auto panel = integrate(integrand, left, right, panel_options);
    total.value += panel.value;
    total.error += panel.error;
    total.converged = total.converged && panel.converged;
    const double ratio = previous != 0.0 ? panel.value / previous : 0.0;
    if (panel.value == 0.0) break;
    if (std::abs(panel.value) <= 1e-17 * std::abs(total.value)) {
      if (++quiet >= 3) break;
    } else {
      quiet = 0;
    }
    if (k > 40 && ratio > 0.0 && ratio < 1.0 &&
        std::abs(panel.value) * ratio / (1.0 - ratio) <= 1e-15 * std::abs(total.value)) {
      total.value += panel.value * ratio / (1.0 - ratio);
      break;
    }
    previous = panel.value;
    last_ratio = ratio;
    left = right;
  }
  total.converged = total.converged && std::isfinite(total.value);
  return total;
}

bool tail_diverges(const ScalarFunction& integrand, double lower) {
  const double start = lower > 0.0 ? lower : 1.0;
  QuadratureOptions coarse;
  coarse.rel_tol = 1e-8;
  double previous = 0.0;
  int stalled = 0;
  double left = start;
  for (int k = 1; k <= 60; ++k) {
    const double right = 2.0 * left;
    const double increment = std::abs(integrate(integrand, left, right, coarse).value);
    if (!std::isfinite(increment)) return true;
    if (increment == 0.0) return false;
    if (k > 1) {
      // Convergent tails shrink each doubling by a factor bounded away from one.
      stalled = increment > 0.999 * previous ? stalled + 1 : 0;
    }
    previous = increment;
    left = right;
  }
  return stalled >= 20;
}

}  // namespace blowup
