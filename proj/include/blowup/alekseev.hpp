#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "blowup/errors.hpp"
#include "blowup/nonlinearity.hpp"
#include "blowup/ode.hpp"

namespace blowup {

template <int D>
using Vector = Eigen::Matrix<double, D, 1>;
template <int D>
using Matrix = Eigen::Matrix<double, D, D>;

/// Autonomous vector field h on R^D with optional analytic Jacobian.
template <int D>
struct VectorField {
  std::function<Vector<D>(const Vector<D>&)> h;
  std::function<Matrix<D>(const Vector<D>&)> jacobian;

  [[nodiscard]] Matrix<D> jacobian_at(const Vector<D>& x) const {
    if (jacobian) return jacobian(x);
    Matrix<D> J;
    for (int k = 0; k < D; ++k) {
      const double step = 1e-6 * (1.0 + std::abs(x[k]));
      Vector<D> plus = x;
      Vector<D> minus = x;
      plus[k] += step;
      minus[k] -= step;
      J.col(k) = (h(plus) - h(minus)) / (2.0 * step);
    }
    return J;
  }
};

/// Single-valued perturbation beta(t, y), required monotone in y.
template <int D>
using Perturbation = std::function<Vector<D>(double, const Vector<D>&)>;

struct FlowOptions {
  OdeOptions ode{1e-12, 1e-14};
  double cap = 1e12;  ///< |y| beyond this inside [t0, t] means blow-up
};

/// phi(t, t0, xi): solution of y' = h(y), y(t0) = xi, evaluated at t (either direction).
template <int D>
[[nodiscard]] Vector<D> flow(const VectorField<D>& field, double t, double t0, const Vector<D>& xi,
                             const FlowOptions& options = {}) {
  if (t == t0) return xi;
  DormandPrince<Vector<D>> stepper([&field](double, const Vector<D>& y) { return field.h(y); }, t0, xi, options.ode);
  while (stepper.t() != t) {
    require(stepper.step(t) && stepper.y().cwiseAbs().maxCoeff() <= options.cap, ErrorCode::BlowupInsideInterval,
            "flow.t", "trajectory leaves the cap before the target time");
  }
  return stepper.y();
}

/// d phi / d xi along the flow, from the variational equation Phi' = Dh(phi) Phi, Phi(t0) = I.
template <int D>
[[nodiscard]] Matrix<D> sensitivity(const VectorField<D>& field, double t, double t0, const Vector<D>& xi,
                                    const FlowOptions& options = {}) {
  if (t == t0) return Matrix<D>::Identity();
  using Augmented = Eigen::Matrix<double, D + D * D, 1>;
  Augmented start;
  start.template head<D>() = xi;
  Eigen::Map<Matrix<D>>(start.data() + D) = Matrix<D>::Identity();
  auto rhs = [&field](double, const Augmented& state) {
    Augmented out;
    const Vector<D> y = state.template head<D>();
    out.template head<D>() = field.h(y);
    Eigen::Map<Matrix<D>>(out.data() + D) = field.jacobian_at(y) * Eigen::Map<const Matrix<D>>(state.data() + D);
    return out;
  };
  DormandPrince<Augmented> stepper(rhs, t0, start, options.ode);
  while (stepper.t() != t) {
    require(stepper.step(t) && stepper.y().template head<D>().cwiseAbs().maxCoeff() <= options.cap,
            ErrorCode::BlowupInsideInterval, "sensitivity.t", "trajectory leaves the cap before the target time");
  }
  return Eigen::Map<const Matrix<D>>(stepper.y().data() + D);
}

struct PerturbedOptions {
  OdeOptions ode{1e-12, 1e-14};
  long explicit_step_budget = 200'000;  ///< beyond this the perturbation is treated as stiff
  int implicit_steps_per_interval = 64;
  bool force_implicit = false;
  double monotonicity_tolerance = 1e-9;
  unsigned seed = 12345;
};

struct PerturbedSolution {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> y;
  bool used_implicit = false;
};

namespace detail {

/// One implicit-midpoint step with Newton iterations on a finite-difference Jacobian.
template <int D, class Rhs>
Vector<D> implicit_midpoint_step(const Rhs& rhs, double t, const Vector<D>& y, double h) {
  Vector<D> next = y + h * rhs(t, y);
  for (int it = 0; it < 50; ++it) {
    const double t_mid = t + 0.5 * h;
    const Vector<D> mid = 0.5 * (y + next);
    const Vector<D> residual = next - y - h * rhs(t_mid, mid);
    Matrix<D> J;
    for (int k = 0; k < D; ++k) {
      const double step = 1e-7 * (1.0 + std::abs(mid[k]));
      Vector<D> plus = mid;
      plus[k] += step;
      J.col(k) = (rhs(t_mid, plus) - rhs(t_mid, mid)) / step;
    }
    const Matrix<D> newton = Matrix<D>::Identity() - 0.5 * h * J;
    const Vector<D> delta = newton.partialPivLu().solve(residual);
    next -= delta;
    if (delta.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + next.cwiseAbs().maxCoeff())) break;
  }
  return next;
}

template <int D>
void check_monotone(const Perturbation<D>& beta, double t, const Vector<D>& y, double tolerance,
                    std::mt19937& rng) {
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < D + 2; ++trial) {
    Vector<D> direction;
    if (trial < D) {
      direction = Vector<D>::Unit(trial);
    } else {
      for (int k = 0; k < D; ++k) direction[k] = normal(rng);
      direction.normalize();
    }
    const double delta = 1e-3 * (1.0 + y.cwiseAbs().maxCoeff());
    const double increment = (beta(t, y + delta * direction) - beta(t, y)).dot(direction) / delta;
    const double scale = 1.0 + beta(t, y).cwiseAbs().maxCoeff();
    require(increment >= -tolerance * scale, ErrorCode::NonMonotonePerturbation, "beta",
            "perturbation decreases along a sampled direction");
  }
}

}  // namespace detail

/// Solves y' + beta(t, y) = h(y), y(t0) = xi, returning the state at every time of `grid`
/// (ascending, grid[0] = t0). Falls back to implicit midpoint when the explicit pair stalls.
template <int D>
[[nodiscard]] PerturbedSolution solve_perturbed(const VectorField<D>& field, const Perturbation<D>& beta,
                                                const Vector<D>& xi, const std::vector<double>& grid,
                                                const PerturbedOptions& options = {}) {
  require(grid.size() >= 2, ErrorCode::OutOfRange, "grid", "grid needs at least two times");
  std::mt19937 rng(options.seed);
  auto rhs = [&](double t, const Vector<D>& y) -> Vector<D> { return field.h(y) - beta(t, y); };
  PerturbedSolution out;
  out.t = grid;
  auto record = [&](const Vector<D>& y) { out.y.emplace_back(Eigen::VectorXd(y)); };

  bool explicit_ok = !options.force_implicit;
  if (explicit_ok) {
    DormandPrince<Vector<D>> stepper(rhs, grid.front(), xi, options.ode);
    record(xi);
    long steps = 0;
    for (std::size_t i = 1; i < grid.size() && explicit_ok; ++i) {
      while (stepper.t() != grid[i]) {
        if (!stepper.step(grid[i]) || ++steps > options.explicit_step_budget) {
          explicit_ok = false;
          break;
        }
      }
      if (explicit_ok) record(stepper.y());
    }
  }
  if (!explicit_ok) {
    out.y.clear();
    out.used_implicit = true;
    Vector<D> y = xi;
    record(y);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double h = (grid[i] - grid[i - 1]) / options.implicit_steps_per_interval;
      for (int k = 0; k < options.implicit_steps_per_interval; ++k) {
        y = detail::implicit_midpoint_step<D>(rhs, grid[i - 1] + k * h, y, h);
      }
      record(y);
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::check_monotone<D>(beta, grid[i], Vector<D>(out.y[i]), options.monotonicity_tolerance, rng);
  }
  return out;
}

struct RepresentationReport {
  double max_residual = 0.0;         ///< on the full grid
  double coarse_max_residual = 0.0;  ///< on every other node
  std::vector<double> residuals;     ///< per grid node
};

namespace detail {

/// Composite Simpson weights on nodes 0..j of a uniform grid (3/8 rule closes odd counts).
inline std::vector<double> simpson_weights(int j, double h) {
  std::vector<double> w(static_cast<std::size_t>(j + 1), 0.0);
  if (j == 0) return w;
  if (j == 1) {
    w[0] = w[1] = 0.5 * h;
    return w;
  }
  int simpson_end = j;
  if (j % 2 == 1) {
    simpson_end = j - 3;
    const double c = 3.0 * h / 8.0;
    w[static_cast<std::size_t>(j - 3)] += c;
    w[static_cast<std::size_t>(j - 2)] += 3.0 * c;
    w[static_cast<std::size_t>(j - 1)] += 3.0 * c;
    w[static_cast<std::size_t>(j)] += c;
  }
  for (int i = 0; i + 2 <= simpson_end; i += 2) {
    w[static_cast<std::size_t>(i)] += h / 3.0;
    w[static_cast<std::size_t>(i + 1)] += 4.0 * h / 3.0;
    w[static_cast<std::size_t>(i + 2)] += h / 3.0;
  }
  return w;
}

template <int D>
std::vector<double> representation_residuals(const VectorField<D>& field, const Perturbation<D>& beta,
                                             const Vector<D>& xi, const std::vector<double>& grid,
                                             const PerturbedSolution& solution, const FlowOptions& flow_options) {
  const double h = grid[1] - grid[0];
  std::vector<Vector<D>> forcing(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) forcing[i] = beta(grid[i], Vector<D>(solution.y[i]));
  std::vector<double> residuals(grid.size(), 0.0);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const auto weights = simpson_weights(static_cast<int>(j), h);
    Vector<D> integral = Vector<D>::Zero();
    for (std::size_t i = 0; i <= j; ++i) {
      if (forcing[i].isZero(0.0)) continue;
      integral += weights[i] * (sensitivity<D>(field, grid[j], grid[i], Vector<D>(solution.y[i]), flow_options) *
                                forcing[i]);
    }
    const Vector<D> rhs = flow<D>(field, grid[j], grid[0], xi, flow_options) - integral;
    residuals[j] = (Vector<D>(solution.y[j]) - rhs).cwiseAbs().maxCoeff();
  }
  return residuals;
}

}  // namespace detail

/// Max over a uniform grid of |y(t) - [phi(t, t0, xi) - int_t0^t Phi(t, s, y(s)) beta(s, y(s)) ds]|.
/// `intervals` must be even so that the halved grid is well defined.
template <int D>
[[nodiscard]] RepresentationReport verify_representation(const VectorField<D>& field, const Perturbation<D>& beta,
                                                         double t0, const Vector<D>& xi, double T, int intervals = 200,
                                                         const PerturbedOptions& options = {}) {
  require(T > t0 && intervals >= 4 && intervals % 2 == 0, ErrorCode::OutOfRange, "grid",
          "need T > t0 and an even number of intervals");
  std::vector<double> grid(static_cast<std::size_t>(intervals + 1));
  for (int i = 0; i <= intervals; ++i) grid[static_cast<std::size_t>(i)] = t0 + (T - t0) * i / intervals;
  const auto solution = solve_perturbed<D>(field, beta, xi, grid, options);
  FlowOptions flow_options;
  flow_options.ode = options.ode;

  RepresentationReport report;
  report.residuals = detail::representation_residuals<D>(field, beta, xi, grid, solution, flow_options);
  for (double r : report.residuals) report.max_residual = std::max(report.max_residual, r);

  std::vector<double> coarse_grid;
  PerturbedSolution coarse;
  for (std::size_t i = 0; i < grid.size(); i += 2) {
    coarse_grid.push_back(grid[i]);
    coarse.y.push_back(solution.y[i]);
  }
  coarse.t = coarse_grid;
  for (double r : detail::representation_residuals<D>(field, beta, xi, coarse_grid, coarse, flow_options)) {
    report.coarse_max_residual = std::max(report.coarse_max_residual, r);
  }
  return report;
}

/// Closed-form scalar flow of u' = lambda f(u) with f frozen above an optional knee.
/// Power and exponential forcings use Phi and its inverse; other laws fall back to integration.
class ScalarFlow {
 public:
  explicit ScalarFlow(ForcingLaw law);
  explicit ScalarFlow(const TruncatedLaw& law);

  [[nodiscard]] double rate(double u) const;
  [[nodiscard]] double rate_derivative(double u) const;
  [[nodiscard]] double flow(double t, double s, double xi) const;
  /// d flow / d xi = rate(flow) / rate(xi), or the linearised growth at an equilibrium.
  [[nodiscard]] double sensitivity(double t, double s, double xi) const;
  [[nodiscard]] double knee() const noexcept { return knee_; }

 private:
  ForcingLaw law_;
  double knee_;
  bool closed_form_;
};

}  // namespace blowup
