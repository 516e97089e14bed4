#include "blowup/neutral_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blowup/fitting.hpp"
#include "blowup/quadrature.hpp"

namespace blowup {
namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ------------------------------------------------------------------ kernel

SingularKernel::SingularKernel(double a, double gamma, double t_star, double tau, double offset)
    : a_(a), gamma_(gamma), t_star_(t_star), tau_(tau), offset_(offset) {}

double SingularKernel::value(double t) const {
  if (t == t_star_) return a_ > 0.0 ? kInf : offset_;
  return a_ * std::pow(std::abs(t - t_star_), -gamma_) + offset_;
}

double SingularKernel::derivative(double t) const {
  const double gap = t - t_star_;
  const double magnitude = a_ * gamma_ * std::pow(std::abs(gap), -gamma_ - 1.0);
  return gap < 0.0 ? magnitude : -magnitude;
}

double SingularKernel::primitive(double t) const {
  const double gap = t - t_star_;
  const double power = std::copysign(std::pow(std::abs(gap), 1.0 - gamma_), gap);
  return a_ / (1.0 - gamma_) * (std::pow(t_star_, 1.0 - gamma_) + power) + offset_ * t;
}

double SingularKernel::cell_average(double t0, double t1) const { return (primitive(t1) - primitive(t0)) / (t1 - t0); }

SingularKernel build_kernel(double q, double a, double gamma, double eps, double T_inf) {
  require(T_inf > 0.0 && std::isfinite(T_inf), ErrorCode::OutOfRange, "T_inf", "blow-up time must be positive");
  require(eps > 0.0 && 2.0 * eps < T_inf, ErrorCode::BadWindow, "control.eps", "need 0 < 2 eps < T_inf");
  require(q > 1.0, ErrorCode::BadExponent, "control.q", "q must exceed one");
  require(gamma > 0.0 && gamma < 1.0 / q, ErrorCode::BadExponent, "control.gamma", "need 0 < gamma < 1/q");
  require(a >= 0.0 && std::isfinite(a), ErrorCode::OutOfRange, "control.amplitude", "amplitude must be nonnegative");
  const double t_star = eps;
  const double tau = T_inf - eps;
  const SingularKernel kernel(a, gamma, t_star, tau, -a * std::pow(t_star, -gamma));
  if (a > 0.0) {
    for (int i = 1; i < 64; ++i) {
      const double t = t_star * i / 64.0;
      require(kernel.value(t) > 0.0 && kernel.derivative(t) > 0.0, ErrorCode::BadExponent, "control.gamma",
              "kernel must be positive and increasing before t*");
    }
  }
  return kernel;
}

// ---------------------------------------------------------------- schedule

ControlSchedule::ControlSchedule(SingularKernel kernel, std::function<double(double)> w,
                                 std::function<double(double)> w_prime, double T_inf)
    : kernel_(kernel), w_(std::move(w)), w_prime_(std::move(w_prime)), T_inf_(T_inf) {}

std::pair<double, double> ControlSchedule::active_window() const { return {kernel_.delay(), T_inf_}; }

double ControlSchedule::antiderivative(double t) const {
  const double shifted = t - kernel_.delay();
  if (shifted <= 0.0) return 0.0;
  require(t < T_inf_, ErrorCode::SampleOnSingularSet, "t", "antiderivative is singular at T_inf");
  // int_0^s B' w = B(s) w(s) - int_0^s B w', with B(0) = 0.
  const auto correction =
      integrate([this](double s) { return kernel_.value(s) * w_prime_(s); }, 0.0, shifted, {1e-14, 1e-11, 4000});
  return kernel_.value(shifted) * w_(shifted) - correction.value;
}

double ControlSchedule::reflected_antiderivative(double t) const { return antiderivative(2.0 * T_inf_ - t); }

double ControlSchedule::pointwise(double t) const {
  if (t <= kernel_.delay() || t >= T_inf_) return 0.0;
  const double shifted = t - kernel_.delay();
  return kernel_.derivative(shifted) * w_(shifted);
}

double ControlSchedule::reflected_pointwise(double t) const { return -pointwise(2.0 * T_inf_ - t); }

int ControlSchedule::sign(double t) const {
  const double phase = std::fmod(t, 2.0 * T_inf_);
  return phase < T_inf_ ? 1 : -1;
}

// ------------------------------------------------------------ neutral solve

std::vector<double> singular_grid(double tau, double t_star, const NeutralOptions& options, std::size_t* last_before) {
  require(t_star > 0.0 && t_star < tau, ErrorCode::BadWindow, "control.eps", "t* must lie inside (0, tau)");
  require(options.refinement_ratio > 0.0 && options.refinement_ratio < 1.0, ErrorCode::OutOfRange,
          "neutral.refinement_ratio", "ratio must lie in (0, 1)");
  const double h = tau / options.base_intervals;
  const double d0 = std::min({h, 0.5 * t_star, 0.5 * (tau - t_star)});
  std::vector<double> gaps;  // distances from t*, decreasing
  for (double d = d0; d >= options.min_gap * (1.0 - 1e-12); d *= options.refinement_ratio) gaps.push_back(d);

  std::vector<double> grid;
  const int left = std::max(1, static_cast<int>(std::ceil((t_star - d0) / h)));
  for (int i = 0; i < left; ++i) grid.push_back((t_star - d0) * i / left);
  for (double d : gaps) grid.push_back(t_star - d);
  if (last_before) *last_before = grid.size() - 1;
  for (auto it = gaps.rbegin(); it != gaps.rend(); ++it) grid.push_back(t_star + *it);
  const double start = t_star + d0;
  const int right = std::max(1, static_cast<int>(std::ceil((tau - start) / h)));
  for (int i = 1; i <= right; ++i) grid.push_back(start + (tau - start) * i / right);
  return grid;
}

NeutralSolution solve_neutral(const TruncatedLaw& forcing, const std::function<double(double)>& history,
                              const SingularKernel& kernel, const NeutralOptions& options,
                              std::optional<double> initial_value, const Absorption& absorption) {
  const ScalarFlow flow(forcing);
  const double tau = kernel.delay();
  const double t_star = kernel.t_star();
  const double gamma = kernel.gamma();

  NeutralSolution out;
  out.t = singular_grid(tau, t_star, options, &out.last_before_singularity);
  const auto& s = out.t;
  const std::size_t n = s.size();
  const double z0 = initial_value.value_or(history(0.0));

  std::vector<double> free(n), kernel_w(n), w(n), weight(n), averages(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    free[j] = flow.flow(s[j], 0.0, z0);
    w[j] = history(s[j] - tau);
    kernel_w[j] = kernel.value(s[j]) * w[j];
    weight[j] = std::pow(std::abs(s[j] - t_star), gamma);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) averages[i] = kernel.cell_average(s[i], s[i + 1]);

  auto transfer = [&](std::size_t j, std::size_t i, double zi) {
    if (i == j || zi >= flow.knee()) return 1.0;
    return flow.sensitivity(s[j], s[i], zi);
  };

  std::vector<double> z(n);
  for (std::size_t j = 0; j < n; ++j) z[j] = free[j] + kernel_w[j];
  std::vector<double> next(n);
  double relaxation = 1.0;
  double previous_residual = kInf;
  auto weighted_norm = [&](const std::vector<double>& v) {
    double norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) norm = std::max(norm, weight[j] * std::abs(v[j]));
    return norm;
  };

  std::vector<double> absorbed(n, 0.0);
  for (int iteration = 1; iteration <= options.max_iterations; ++iteration) {
    if (absorption)
      for (std::size_t i = 0; i < n; ++i) absorbed[i] = absorption(s[i], z[i]);
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      double source = 0.0;
      double g_prev = transfer(j, 0, z[0]) * w[0];
      double c_prev = absorption ? transfer(j, 0, z[0]) * absorbed[0] : 0.0;
      for (std::size_t i = 0; i < j; ++i) {
        const double phi_next = transfer(j, i + 1, z[i + 1]);
        const double g_next = phi_next * w[i + 1];
        sum += averages[i] * (g_next - g_prev);
        g_prev = g_next;
        if (absorption) {
          const double c_next = phi_next * absorbed[i + 1];
          source += 0.5 * (s[i + 1] - s[i]) * (c_next + c_prev);
          c_prev = c_next;
        }
      }
      next[j] = free[j] + kernel_w[j] - sum - source;
    }
    double residual = 0.0;
    for (std::size_t j = 0; j < n; ++j) residual = std::max(residual, weight[j] * std::abs(next[j] - z[j]));
    require(std::isfinite(residual), ErrorCode::FixedPointDiverged, "neutral", "iterate is not finite");
    out.residual_history.push_back(residual);
    if (residual > previous_residual) relaxation = 0.5;
    previous_residual = residual;
    for (std::size_t j = 0; j < n; ++j) z[j] += relaxation * (next[j] - z[j]);
    out.iterations = iteration;
    if (residual <= options.tolerance * std::max(1.0, weighted_norm(z))) {
      out.z = z;
      out.regular.resize(n);
      for (std::size_t j = 0; j < n; ++j) out.regular[j] = z[j] - kernel_w[j];
      out.weighted_norm = weighted_norm(z);
      return out;
    }
  }
  throw ContractError(ErrorCode::FixedPointDiverged, "neutral.max_iterations",
                      "Picard iteration did not converge; last residual " + std::to_string(previous_residual));
}

SingularFit fit_singularity(const NeutralSolution& solution, const SingularKernel& kernel) {
  const auto& s = solution.t;
  const auto& z = solution.z;
  const std::size_t last = solution.last_before_singularity;
  const double t_star = kernel.t_star();
  const double nearest = t_star - s[last];
  std::size_t first = last;
  while (first > 0 && t_star - s[first - 1] <= 10.0 * nearest * (1.0 + 1e-9)) --first;
  require(last - first >= 3, ErrorCode::InsufficientDecade, "neutral.min_gap",
          "too few samples in the last decade before t*");

  std::vector<double> log_gap, log_slope, mid;
  double ratio_sum = 0.0;
  for (std::size_t k = first; k < last; ++k) {
    const double secant = (z[k + 1] - z[k]) / (s[k + 1] - s[k]);
    require(secant > 0.0, ErrorCode::InsufficientDecade, "neutral", "z is not increasing towards t*");
    log_gap.push_back(std::log(t_star - s[k]));
    log_slope.push_back(std::log(secant));
    mid.push_back(0.5 * (s[k] + s[k + 1]));
    ratio_sum += (t_star - s[k + 1]) / (t_star - s[k]);
  }
  SingularFit fit;
  fit.samples = static_cast<int>(log_gap.size());
  const auto fixed = fit_line(log_gap, log_slope);
  fit.gamma = -fixed.slope - 1.0;
  // Secants of A x^{-gamma} over x -> r x equal A x^{-gamma-1} (r^{-gamma} - 1) / (1 - r).
  const double r = ratio_sum / static_cast<double>(log_gap.size());
  fit.prefactor = std::exp(fixed.intercept) * (1.0 - r) / (std::pow(r, -fit.gamma) - 1.0);

  auto free_fit = [&](double T) {
    std::vector<double> x(mid.size());
    for (std::size_t k = 0; k < mid.size(); ++k) x[k] = std::log(T - mid[k]);
    return fit_line(x, log_slope);
  };
  const double lower = s[last];
  const double upper = t_star + 10.0 * nearest;
  fit.T_est = golden_section_minimum([&](double T) { return free_fit(T).residual_sum_squares; }, lower, upper);
  fit.gamma_free = -free_fit(fit.T_est).slope - 1.0;
  return fit;
}

// ---------------------------------------------------------- full pipeline

TrajectorySegment reflect(const PiecewiseTrajectory& forward, double T_inf) {
  TrajectorySegment mirrored;
  mirrored.tag = SegmentTag::Reflected;
  for (auto seg = forward.segments().rbegin(); seg != forward.segments().rend(); ++seg) {
    for (std::size_t k = seg->t.size(); k-- > 0;) {
      const double t = 2.0 * T_inf - seg->t[k];
      if (!mirrored.t.empty() && std::abs(t - mirrored.t.back()) <= 1e-14 * T_inf) continue;
      mirrored.t.push_back(t);
      mirrored.u.push_back(seg->u[k]);
    }
    if (seg->singular_end) {
      mirrored.singular_begin = true;
      mirrored.singular_mass += seg->singular_mass;
    }
  }
  return mirrored;
}

PiecewiseTrajectory periodic_extend(const PiecewiseTrajectory& period_template, double horizon) {
  require(!period_template.empty(), ErrorCode::TemplateMismatch, "template", "empty template");
  const auto& first = period_template.segments().front();
  const auto& last = period_template.segments().back();
  require(std::abs(first.u.front() - last.u.back()) <= 1e-8 * std::max(1.0, std::abs(first.u.front())),
          ErrorCode::TemplateMismatch, "template", "template does not return to its initial value");
  const double origin = period_template.begin();
  const double period = period_template.end() - origin;
  const double end = horizon > 0.0 ? horizon : origin + period;
  PiecewiseTrajectory out;
  out.set_period(period);
  for (int k = 0; origin + k * period < end - 1e-12 * period; ++k) {
    for (const auto& seg : period_template.segments()) {
      TrajectorySegment copy = seg;
      if (k > 0) copy.tag = SegmentTag::Periodic;
      for (double& t : copy.t) t += k * period;
      if (copy.begin() >= end - 1e-12 * period) break;
      if (copy.end() > end + 1e-12 * period) {
        // Cut the final copy at the horizon.
        std::size_t keep = 0;
        while (keep < copy.t.size() && copy.t[keep] <= end) ++keep;
        const double t_prev = copy.t[keep - 1];
        const double t_next = copy.t[keep];
        const double weight = (end - t_prev) / (t_next - t_prev);
        const double u_end = std::isfinite(copy.u[keep]) && std::isfinite(copy.u[keep - 1])
                                 ? (1.0 - weight) * copy.u[keep - 1] + weight * copy.u[keep]
                                 : kInf;
        copy.t.resize(keep);
        copy.u.resize(keep);
        if (copy.t.back() < end) {
          copy.t.push_back(end);
          copy.u.push_back(u_end);
        }
        copy.singular_end = false;
        if (!copy.singular_begin) copy.singular_mass = 0.0;
      }
      out.append(std::move(copy));
    }
  }
  return out;
}

double coincidence_check(const PiecewiseTrajectory& controlled, const BlowupSolution& uncontrolled, double eps) {
  const double limit = uncontrolled.T_inf - eps;
  double worst = 0.0;
  for (const auto& seg : controlled.segments()) {
    for (std::size_t k = 0; k < seg.t.size(); ++k) {
      const double t = seg.t[k];
      if (t > limit * (1.0 + 1e-14) || t >= uncontrolled.T_inf) continue;
      worst = std::max(worst, std::abs(seg.u[k] - uncontrolled(std::min(t, limit))));
    }
  }
  return worst;
}

ControlledExplosion controlled_explosion(const ForcingLaw& law, double u0, const ControlConfig& config) {
  const auto uncontrolled = closed_trajectory(law, u0);
  const double T_inf = uncontrolled.T_inf;
  const auto kernel = build_kernel(config.q, config.amplitude, config.gamma, config.eps, T_inf);
  const double tau = kernel.delay();
  const double knee = config.knee.value_or(uncontrolled(tau));
  require(knee > 0.0, ErrorCode::OutOfRange, "control.knee", "knee must be positive");

  // Uncontrolled phase, integrated numerically so the coincidence check compares independent data.
  TrajectorySegment original;
  original.tag = SegmentTag::Original;
  {
    DormandPrince<double> stepper([&law](double, double u) { return law.lambda() * law.value(u); }, 0.0, u0,
                                  OdeOptions{1e-13, 1e-15});
    original.t.push_back(0.0);
    original.u.push_back(u0);
    for (int i = 1; i <= config.original_intervals; ++i) {
      const double t = tau * i / config.original_intervals;
      stepper.advance_to(t);
      original.t.push_back(t);
      original.u.push_back(stepper.y());
    }
  }

  auto history = [&uncontrolled, tau](double theta) { return uncontrolled(theta + tau); };
  ControlledExplosion result{uncontrolled, kernel, std::nullopt, {}, {}, knee, T_inf, 0.0, {}};

  TrajectorySegment growth;
  growth.tag = SegmentTag::SingularGrowth;
  growth.singular_end = true;
  const double t_star = kernel.t_star();
  if (config.uncontrolled_tail) {
    std::size_t last = 0;
    const auto grid = singular_grid(tau, t_star, config.neutral, &last);
    for (std::size_t j = 0; j <= last; ++j) {
      growth.t.push_back(tau + grid[j]);
      growth.u.push_back(j == 0 ? uncontrolled(tau) : phi_inv(law, law.lambda() * (t_star - grid[j])));
    }
    const double sliver = t_star - grid[last];
    const auto mass = integrate([&law](double x) { return phi_inv(law, law.lambda() * x); }, 0.0, sliver,
                                {1e-14, 1e-8, 2000});
    growth.singular_mass = mass.converged ? mass.value : kInf;
  } else {
    result.neutral = solve_neutral(truncate(law, knee), history, kernel, config.neutral);
    result.fit = fit_singularity(result.neutral, kernel);
    result.T_est = tau + result.fit.T_est;
    auto w = [uncontrolled](double s) { return uncontrolled(s); };
    auto w_prime = [uncontrolled](double s) { return uncontrolled.law.lambda() * uncontrolled.law.value(uncontrolled(s)); };
    result.schedule.emplace(kernel, w, w_prime, T_inf);
    for (double r : result.neutral.regular) result.regular_bound = std::max(result.regular_bound, std::abs(r));
    const std::size_t last = result.neutral.last_before_singularity;
    for (std::size_t j = 0; j <= last; ++j) {
      growth.t.push_back(tau + result.neutral.t[j]);
      growth.u.push_back(result.neutral.z[j]);
    }
    const double sliver = t_star - result.neutral.t[last];
    const double gamma = kernel.gamma();
    const double A = kernel.amplitude() * history(t_star - tau);
    growth.singular_mass = A * std::pow(sliver, 1.0 - gamma) / (1.0 - gamma) +
                           (result.neutral.z[last] - A * std::pow(sliver, -gamma)) * sliver;
  }
  growth.t.push_back(T_inf);
  growth.u.push_back(kInf);

  PiecewiseTrajectory forward;
  forward.append(std::move(original));
  forward.append(std::move(growth));
  PiecewiseTrajectory period_template = forward;
  period_template.append(reflect(forward, T_inf));
  const double horizon = config.horizon > 0.0 ? config.horizon : 2.0 * T_inf;
  result.trajectory = periodic_extend(period_template, horizon);
  return result;
}

}  // namespace blowup
