#include "blowup/dynamic_boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blowup/errors.hpp"
#include "blowup/fitting.hpp"

namespace blowup {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<double> keller_osserman_level(const AbsorptionLaw& g, double u) {
  if (g.is_zero()) return std::nullopt;
  try {
    return psi(g, u);
  } catch (const ContractError& error) {
    if (error.code() != ErrorCode::KellerOssermanFails) throw;
    return std::nullopt;
  }
}

/// Cubic Hermite interpolation through samples with known slopes.
class HermiteCurve {
 public:
  HermiteCurve(std::vector<double> t, std::vector<double> y, std::vector<double> slope)
      : t_(std::move(t)), y_(std::move(y)), slope_(std::move(slope)) {}

  double operator()(double x) const {
    if (x <= t_.front()) return y_.front();
    if (x >= t_.back()) return y_.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), x) - t_.begin()) - 1;
    const double h = t_[k + 1] - t_[k];
    const double s = (x - t_[k]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * y_[k] + h10 * h * slope_[k] + h01 * y_[k + 1] + h11 * h * slope_[k + 1];
  }

 private:
  std::vector<double> t_, y_, slope_;
};

double interpolate_profile(const RadialGrid& grid, const Eigen::VectorXd& u, double r) {
  const auto& nodes = grid.nodes;
  Eigen::Index k = 0;
  while (k + 2 < nodes.size() && nodes[k + 1] < r) ++k;
  const double w = (r - nodes[k]) / (nodes[k + 1] - nodes[k]);
  return (1.0 - w) * u[k] + w * u[k + 1];
}

}  // namespace

double BoundaryEvolution::boundary_slope(std::size_t k) const {
  return f.lambda() * f.value(boundary_values[k]) - fluxes[k];
}

// ------------------------------------------------------------ uncontrolled

BoundaryEvolution evolve_uncontrolled(const ForcingLaw& f, const AbsorptionLaw& g, double R, int N, double u0,
                                      const EvolutionOptions& options) {
  require(u0 > 0.0 && std::isfinite(u0), ErrorCode::OutOfRange, "initial.u0", "initial value must be positive");
  require(options.cap > u0, ErrorCode::OutOfRange, "numerics.cap", "cap must exceed the initial value");

  BoundaryEvolution evo{f, g, u0, {}, {}, {}, {}, {}, 0.0, 0.0, kInf, 0.0, true, {}};
  const auto psi_u0 = keller_osserman_level(g, u0);
  if (psi_u0) evo.psi_bound = *psi_u0;

  if (!g.is_zero()) {
    const auto report = domination_report(f, g);
    evo.gate_threshold = restricted_threshold(f, g, u0);
    const double margin = report.regime == DominationRegime::WeakDomination ? 1.01 : 1.0;
    evo.gate_passed = f.lambda() > margin * evo.gate_threshold;
    require(evo.gate_passed || options.force, ErrorCode::DominationFailed, "forcing.lambda",
            "lambda = " + std::to_string(f.lambda()) + " does not exceed the domination threshold " +
                std::to_string(margin * evo.gate_threshold));
  }

  GridOptions grid_options = options.grid;
  if (grid_options.h_bdry <= 0.0) {
    grid_options.h_bdry = 1e-4 * R;
    if (const auto layer = keller_osserman_level(g, options.cap)) grid_options.h_bdry = std::min(1e-4 * R, *layer / 200);
  }
  evo.grid = RadialGrid::refined(R, N, grid_options);

  std::optional<LargeSolution> large;
  if (options.certify && psi_u0) {
    large = large_solution(g, evo.grid);
    evo.certificates.checked_large = true;
    evo.certificates.large_at_09R = interpolate_profile(evo.grid, large->profile.u, 0.9 * R);
  }
  evo.certificates.checked_subsolution = options.certify && psi_u0.has_value();

  auto steady = [&](double b) { return solve_dirichlet(g, evo.grid, b, options.dirichlet); };
  auto flux = [&](double b) { return g.is_zero() ? 0.0 : steady(b).boundary_flux; };
  auto rhs = [&](double, double b) {
    if (!std::isfinite(b) || b <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return f.lambda() * f.value(b) - flux(b);
  };

  const double a_priori = std::max(psi_u0.value_or(0.0), phi(f, u0) / f.lambda());
  const double horizon = options.horizon > 0.0 ? options.horizon : 10.0 * a_priori;

  auto& cert = evo.certificates;
  const Eigen::Index K = evo.grid.size() - 1;
  double next_snapshot = u0;
  auto record = [&](double t, double b) {
    Eigen::VectorXd u;
    double c = 0.0;
    if (g.is_zero()) {
      u = Eigen::VectorXd::Constant(evo.grid.size(), b);
    } else {
      auto profile = steady(b);
      c = profile.boundary_flux;
      u = std::move(profile.u);
    }
    evo.times.push_back(t);
    evo.boundary_values.push_back(b);
    evo.fluxes.push_back(c);

    const double bound = std::sqrt(2.0 * g.primitive(b));
    if (c < 0.0 || c > bound) ++cert.flux_violations;
    if (bound > 0.0) cert.worst_flux_ratio = std::max(cert.worst_flux_ratio, c / bound);

    for (Eigen::Index i = 0; i <= K && evo.grid.nodes[i] <= 0.9 * R; ++i)
      cert.interior_peak = std::max(cert.interior_peak, u[i]);
    if (large) {
      for (Eigen::Index i = 0; i < K; ++i)
        if (u[i] > large->profile.u[i]) ++cert.interior_violations;
      if (cert.interior_peak >= cert.large_at_09R) cert.confined = false;
    }
    if (cert.checked_subsolution && t < evo.psi_bound) {
      for (double nu : options.nus) {
        for (Eigen::Index i = 0; i <= K; ++i) {
          const double below = psi_inv(g, nu * (evo.psi_bound - t + R - evo.grid.nodes[i]));
          cert.worst_subsolution_ratio = std::max(cert.worst_subsolution_ratio, below / u[i]);
          if (below > u[i]) ++cert.subsolution_violations;
        }
      }
    }
    if (b >= next_snapshot) {
      evo.snapshots.push_back({t, b, std::move(u)});
      next_snapshot = 2.0 * b;
    }
  };

  DormandPrince<double> stepper(rhs, 0.0, u0, options.ode);
  record(0.0, u0);
  while (stepper.y() < options.cap) {
    require(stepper.t() < horizon, ErrorCode::CapNotReached, "numerics.cap",
            "boundary value stayed below the cap up to the horizon");
    require(stepper.step(horizon), ErrorCode::CapNotReached, "numerics.cap", "step size underflow before the cap");
    record(stepper.t(), stepper.y());
  }
  if (evo.snapshots.back().t != evo.times.back()) {
    auto profile = g.is_zero() ? Eigen::VectorXd::Constant(evo.grid.size(), evo.boundary_values.back())
                               : steady(evo.boundary_values.back()).u;
    evo.snapshots.push_back({evo.times.back(), evo.boundary_values.back(), std::move(profile)});
  }

  // Phi(b) is nearly linear in t near the blow-up; its zero is the blow-up time.
  std::vector<double> t_fit;
  std::vector<double> phi_fit;
  for (std::size_t k = 0; k < evo.times.size(); ++k) {
    if (evo.boundary_values[k] < options.cap / 10.0) continue;
    t_fit.push_back(evo.times[k]);
    phi_fit.push_back(phi(f, evo.boundary_values[k]));
  }
  require(t_fit.size() >= 3, ErrorCode::InsufficientDecade, "numerics.cap",
          "fewer than three samples in the last decade of growth");
  const auto fit = fit_line(t_fit, phi_fit);
  evo.fitted_rate = -fit.slope;
  evo.T_inf_est = -fit.intercept / fit.slope;
  return evo;
}

// ------------------------------------------------------------------- rates

RateDiagnostics rate_diagnostics(const BoundaryEvolution& evo, const DominationReport& report) {
  const ForcingLaw& f = evo.f;
  const double lambda = f.lambda();
  const double T = evo.T_inf_est;
  RateDiagnostics out;
  out.regime = report.regime;
  out.L = report.L_at_infinity;
  const bool weak = report.regime == DominationRegime::WeakDomination;
  out.rate = weak ? (lambda * out.L - 1.0) / out.L : lambda;
  const auto* power = std::get_if<PowerForcing>(&f.kind());
  const bool pure_power = power && power->shift == 0.0;
  const bool has_psi = std::isfinite(evo.psi_bound);

  const double cap = evo.boundary_values.back();
  for (std::size_t k = 0; k < evo.times.size(); ++k) {
    const double b = evo.boundary_values[k];
    const double remaining = T - evo.times[k];
    if (b < cap / 10.0 || remaining <= 0.0) continue;
    auto& s = out.series;
    s.t.push_back(evo.times[k]);
    s.phi_ratio.push_back(phi(f, b) / remaining);
    s.upper_ratio.push_back(out.rate > 0.0 ? b / phi_inv(f.with_lambda(1.0), out.rate * remaining) : kInf);
    s.psi_ratio.push_back(has_psi ? b / psi_inv(evo.g, remaining) : std::nan(""));
    s.two_sided_ratio.push_back(weak ? s.upper_ratio.back() : std::nan(""));
    s.power_scaled.push_back(pure_power ? b * std::pow(remaining, 1.0 / (power->p - 1.0)) : std::nan(""));
  }
  out.samples = static_cast<int>(out.series.t.size());
  require(out.samples >= 10, ErrorCode::InsufficientDecade, "numerics.cap",
          "only " + std::to_string(out.samples) + " samples in the last decade before T_inf");
  out.terminal_phi = out.series.phi_ratio.back();
  out.terminal_upper = out.series.upper_ratio.back();
  out.terminal_psi = out.series.psi_ratio.back();
  out.terminal_two_sided = out.series.two_sided_ratio.back();
  out.terminal_power_scaled = out.series.power_scaled.back();
  if (pure_power) {
    const double p = power->p;
    const double coefficient = weak ? out.L / ((lambda * out.L - 1.0) * (p - 1.0)) : 1.0 / (lambda * (p - 1.0));
    out.power_bound = std::pow(coefficient, 1.0 / (p - 1.0));
  }
  return out;
}

// --------------------------------------------------------------- controlled

ControlledBoundary evolve_controlled(const ForcingLaw& f, const AbsorptionLaw& g, double R, int N, double u0,
                                     const ControlledBoundaryConfig& config) {
  auto evo = evolve_uncontrolled(f, g, R, N, u0, config.evolution);
  const double T = evo.T_inf_est;
  const double eps = config.eps_fraction * T;
  const auto kernel = build_kernel(config.q, config.amplitude, config.gamma, eps, T);
  const double tau = kernel.delay();
  require(tau < evo.times.back(), ErrorCode::BadWindow, "control.eps", "window starts after the recorded run");

  std::vector<double> slopes(evo.times.size());
  for (std::size_t k = 0; k < slopes.size(); ++k) slopes[k] = evo.boundary_slope(k);
  const HermiteCurve boundary_curve(evo.times, evo.boundary_values, slopes);
  const double knee = boundary_curve(tau);

  const auto f_knee = truncate(f, knee);
  const auto g_knee = g.is_zero() ? g : AbsorptionLaw(g.kind(), knee);
  auto history = [&boundary_curve, tau](double theta) { return boundary_curve(theta + tau); };
  ControlledBoundary out{std::move(evo), kernel, {}, {}, {}, 0.0, {}, {}, eps, knee, 0.0, 0, 0, 0, true};
  const auto& base = out.uncontrolled;
  auto steady = [&](double b) { return solve_dirichlet(g_knee, base.grid, b, config.evolution.dirichlet); };
  Absorption absorption;
  if (!g.is_zero()) absorption = [&](double, double z) { return steady(z).boundary_flux; };
  out.boundary = solve_neutral(f_knee, history, kernel, config.neutral, knee, absorption);
  out.fit = fit_singularity(out.boundary, kernel);
  out.T_est = tau + out.fit.T_est;

  // Comparison solution: same control, no flux, started from the truncated flow of u0.
  const ScalarFlow truncated_flow(f_knee);
  out.comparison = solve_neutral(f_knee, history, kernel, config.neutral, truncated_flow.flow(tau, 0.0, u0));

  auto forward = [&](const NeutralSolution& window, const std::function<double(double)>& before) {
    TrajectorySegment original;
    original.tag = SegmentTag::Original;
    for (double t : base.times) {
      if (t >= tau) break;
      original.t.push_back(t);
      original.u.push_back(before(t));
    }
    original.t.push_back(tau);
    original.u.push_back(before(tau));
    TrajectorySegment growth;
    growth.tag = SegmentTag::SingularGrowth;
    growth.singular_end = true;
    const std::size_t last = window.last_before_singularity;
    for (std::size_t j = 0; j <= last; ++j) {
      growth.t.push_back(tau + window.t[j]);
      growth.u.push_back(window.z[j]);
    }
    const double sliver = kernel.t_star() - window.t[last];
    const double A = kernel.amplitude() * history(kernel.t_star() - tau);
    growth.singular_mass = A * std::pow(sliver, 1.0 - kernel.gamma()) / (1.0 - kernel.gamma()) +
                           (window.z[last] - A * std::pow(sliver, -kernel.gamma())) * sliver;
    growth.t.push_back(T);
    growth.u.push_back(kInf);
    PiecewiseTrajectory path;
    path.append(std::move(original));
    path.append(std::move(growth));
    PiecewiseTrajectory period = path;
    period.append(reflect(path, T));
    return periodic_extend(period, config.horizon_factor * T);
  };
  out.trajectory = forward(out.boundary, [&](double t) { return boundary_curve(t); });
  out.upper = forward(out.comparison, [&](double t) { return truncated_flow.flow(t, 0.0, u0); });

  // Certificates on matching samples: boundary value, flux bound, comparison and interior finiteness.
  // y and V come from different integrators, so the ordering allows their common tolerance.
  constexpr double slack = 1e-6;
  const auto& ys = out.trajectory.segments();
  const auto& vs = out.upper.segments();
  for (std::size_t s = 0; s < ys.size(); ++s) {
    for (std::size_t k = 0; k < ys[s].t.size(); ++k) {
      const double y = ys[s].u[k];
      const double v = vs[s].u[k];
      if (!std::isfinite(y)) continue;
      ++out.comparison_samples;
      if (y > v * (1.0 + slack)) ++out.comparison_violations;
      if (g.is_zero() || k % static_cast<std::size_t>(std::max(1, config.interior_stride)) != 0) continue;
      const auto profile = steady(y);
      const double c = profile.boundary_flux;
      const double bound = std::sqrt(2.0 * g_knee.primitive(y));
      if (c < 0.0 || c > bound) ++out.flux_violations;
      if (std::isfinite(v) && v > 0.0) out.K_R = std::max(out.K_R, c / std::sqrt(v));
      if (!profile.u.allFinite()) out.interior_finite = false;
      if (profile.u.maxCoeff() > v * (1.0 + slack)) ++out.comparison_violations;
    }
  }
  return out;
}

}  // namespace blowup
