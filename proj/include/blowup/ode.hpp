#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <type_traits>

#include "blowup/errors.hpp"

namespace blowup {

struct OdeOptions {
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  double initial_step = 0.0;  ///< 0 selects a step from the local scale
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 2'000'000;
};

namespace detail {

inline double scaled_error(double err, double y, double y_new, const OdeOptions& o) {
  return std::abs(err) / (o.abs_tol + o.rel_tol * std::max(std::abs(y), std::abs(y_new)));
}

template <class Derived>
double scaled_error(const Eigen::MatrixBase<Derived>& err, const Eigen::MatrixBase<Derived>& y,
                    const Eigen::MatrixBase<Derived>& y_new, const OdeOptions& o) {
  const auto scale = (y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array() * o.rel_tol + o.abs_tol).eval();
  return (err.cwiseAbs().array() / scale).maxCoeff();
}

inline bool all_finite(double y) { return std::isfinite(y); }

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& y) {
  return y.allFinite();
}

inline double magnitude(double y) { return std::abs(y); }

template <class Derived>
double magnitude(const Eigen::MatrixBase<Derived>& y) {
  return y.cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) stepper. State is double or a fixed-size Eigen vector.
template <class State>
class DormandPrince {
 public:
  using Rhs = std::function<State(double, const State&)>;

  DormandPrince(Rhs rhs, double t0, State y0, OdeOptions options = {})
      : rhs_(std::move(rhs)), options_(options), t_(t0), y_(std::move(y0)) {
    k1_ = rhs_(t_, y_);
  }

  [[nodiscard]] double t() const noexcept { return t_; }
  /// Low part of the compensated time t() + t_low(); resolves steps far below ulp(t).
  [[nodiscard]] double t_low() const noexcept { return t_low_; }
  [[nodiscard]] const State& y() const noexcept { return y_; }
  [[nodiscard]] const State& slope() const noexcept { return k1_; }
  [[nodiscard]] long accepted_steps() const noexcept { return accepted_; }
  [[nodiscard]] long rejected_steps() const noexcept { return rejected_; }

  /// Takes one accepted step towards `t_stop` without passing it. Returns false if the step
  /// size underflows or the right-hand side stays non-finite.
  bool step(double t_stop) {
    const double span = t_stop - t_;
    if (span == 0.0) return true;
    const double direction = span > 0.0 ? 1.0 : -1.0;
    if (h_ == 0.0) h_ = initial_step(span);
    for (;;) {
      double h = direction * std::min({std::abs(h_), std::abs(span), options_.max_step});
      if (std::abs(h) < min_step() && std::abs(span) > min_step()) return false;
      State y_new;
      State k7;
      const double err = attempt(h, y_new, k7);
      if (std::isfinite(err) && err <= 1.0) {
        if (std::abs(span) <= std::abs(h)) {
          t_ = t_stop;
          t_low_ = 0.0;
        } else {
          accumulate_time(h);
        }
        y_ = std::move(y_new);
        k1_ = std::move(k7);
        ++accepted_;
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h_ = std::abs(h) * factor;
        return true;
      }
      ++rejected_;
      const double factor = std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.5) : 0.1;
      h_ = std::abs(h) * factor;
    }
  }

  /// Integrates exactly to `t_target`; throws on failure.
  void advance_to(double t_target) {
    long steps = 0;
    while (t_ != t_target) {
      require(step(t_target) && ++steps < options_.max_steps, ErrorCode::BlowupInsideInterval, "ode.t",
              "integration stalled before the target time");
    }
  }

 private:
  /// Steps below this fraction of the local time scale |y| / |y'| signal a stall.
  double min_step() const {
    const double rate = detail::magnitude(k1_);
    const double scale = rate > 0.0 ? detail::magnitude(y_) / rate : 1.0;
    return std::max(1e-13 * scale, 1e-300);
  }

  // Two-sum accumulation of the time so that steps far below ulp(t) still advance it.
  void accumulate_time(double h) {
    const double sum = t_ + h;
    const double back = sum - t_;
    const double err = (t_ - (sum - back)) + (h - back);
    const double low = t_low_ + err;
    t_ = sum + low;
    t_low_ = low - (t_ - sum);
  }

  double initial_step(double span) const {
    if (options_.initial_step > 0.0) return options_.initial_step;
    const double y_scale = detail::magnitude(y_) + 1e-10;
    const double f_scale = detail::magnitude(k1_) + 1e-10;
    return std::min(std::abs(span) * 1e-2, 1e-2 * y_scale / f_scale);
  }

  double attempt(double h, State& y_new, State& k7) const {
    constexpr double a21 = 1.0 / 5.0;
    constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                     a54 = -212.0 / 729.0;
    constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                     a65 = -5103.0 / 18656.0;
    constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                     b6 = 11.0 / 84.0;
    constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                     e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    const State& k1 = k1_;
    const State k2 = rhs_(t_ + h / 5.0, State(y_ + h * (a21 * k1)));
    const State k3 = rhs_(t_ + 3.0 * h / 10.0, State(y_ + h * (a31 * k1 + a32 * k2)));
    const State k4 = rhs_(t_ + 4.0 * h / 5.0, State(y_ + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const State k5 = rhs_(t_ + 8.0 * h / 9.0, State(y_ + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const State k6 =
        rhs_(t_ + h, State(y_ + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    y_new = y_ + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    if (!detail::all_finite(y_new)) return std::numeric_limits<double>::infinity();
    k7 = rhs_(t_ + h, y_new);
    if (!detail::all_finite(k7)) return std::numeric_limits<double>::infinity();
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    return detail::scaled_error(err, y_, y_new, options_);
  }

  Rhs rhs_;
  OdeOptions options_;
  double t_;
  double t_low_ = 0.0;
  State y_;
  State k1_;
  double h_ = 0.0;
  long accepted_ = 0;
  long rejected_ = 0;
};

}  // namespace blowup
