#include "blowup/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "blowup/errors.hpp"
#include "blowup/fitting.hpp"

namespace blowup {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double central_difference(const ScalarFunction& f, double u) {
  const double h = 1e-6 * std::max(1.0, std::abs(u));
  return (f(u + h) - f(u - h)) / (2.0 * h);
}

std::vector<double> log_grid(double lower, double upper, int per_decade) {
  std::vector<double> grid;
  const int count = std::max(2, static_cast<int>(std::ceil(std::log10(upper / lower) * per_decade)) + 1);
  for (int i = 0; i < count; ++i) {
    grid.push_back(lower * std::pow(upper / lower, static_cast<double>(i) / (count - 1)));
  }
  return grid;
}

void check_monotone_nonnegative(const ScalarFunction& f, std::string_view parameter) {
  double previous = f(0.0);
  require(previous >= 0.0, ErrorCode::OutOfRange, parameter, "law must be nonnegative on [0, inf)");
  for (double u : log_grid(1e-6, 1e6, 4)) {
    const double current = f(u);
    if (std::isnan(current)) continue;
    require(current >= 0.0, ErrorCode::OutOfRange, parameter, "law must be nonnegative on [0, inf)");
    require(current >= previous * (1.0 - 1e-12), ErrorCode::OutOfRange, parameter,
            "law must be nondecreasing on [0, inf)");
    previous = current;
  }
}

/// Solves value(r) = z for a strictly decreasing value(.) on [r_min, inf).
template <class Value, class Slope>
double invert_decreasing(const Value& value, const Slope& slope, double z, double r_min, std::string_view parameter) {
  require(z > 0.0 && std::isfinite(z), ErrorCode::OutOfRange, parameter, "target outside the range");
  double lo = 0.0;
  double hi = 0.0;
  double r = std::max(1.0, 2.0 * r_min);
  if (value(r) > z) {
    lo = r;
    hi = 2.0 * r;
    while (value(hi) > z) {
      lo = hi;
      hi *= 2.0;
      require(hi < 1e300, ErrorCode::OutOfRange, parameter, "target below the range");
    }
  } else {
    hi = r;
    lo = 0.5 * r;
    while (lo > r_min && value(lo) <= z) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-300) lo = 0.0;
    }
    if (lo <= r_min) {
      lo = r_min;
      const double at_min = value(r_min);
      require(std::isfinite(at_min) && at_min >= z * (1.0 - 1e-12), ErrorCode::OutOfRange, parameter,
              "target above the range");
      if (std::abs(at_min - z) <= 1e-12 * z) return r_min;
    }
  }
  while (hi - lo > 1e-6 * hi) {
    const double mid = lo > 0.0 && hi / lo > 4.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    (value(mid) > z ? lo : hi) = mid;
  }
  r = 0.5 * (lo + hi);
  for (int it = 0; it < 60; ++it) {
    const double residual = value(r) - z;
    if (std::abs(residual) <= 1e-13 * z) break;
    double next = r - residual / slope(r);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    (value(next) > z ? lo : hi) = next;
    if (next == r) break;
    r = next;
  }
  return r;
}

double forcing_phi_quadrature(const ForcingLaw& law, double r) {
  QuadratureOptions options;
  options.rel_tol = 1e-13;
  const auto result = integrate_to_infinity([&](double s) { return 1.0 / law.value(s); }, r, options);
  return result.value;
}

double absorption_psi_quadrature(const AbsorptionLaw& law, double delta) {
  QuadratureOptions options;
  options.rel_tol = 1e-13;
  return integrate_to_infinity([&](double s) { return 1.0 / std::sqrt(2.0 * law.primitive(s)); }, delta, options)
      .value;
}

}  // namespace

// ---------------------------------------------------------------- ForcingLaw

ForcingLaw::ForcingLaw(Kind kind, double lambda, std::optional<double> monotonicity_exponent)
    : kind_(std::move(kind)), lambda_(lambda), monotonicity_exponent_(monotonicity_exponent) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::OutOfRange, "forcing.lambda", "lambda must be positive");
  if (const auto* power = std::get_if<PowerForcing>(&kind_)) {
    require(power->p > 0.0, ErrorCode::OutOfRange, "forcing.p", "exponent must be positive");
    require(power->shift >= 0.0, ErrorCode::OutOfRange, "forcing.k", "shift must be nonnegative");
  }
  if (const auto* custom = std::get_if<CustomForcing>(&kind_)) {
    require(static_cast<bool>(custom->f), ErrorCode::OutOfRange, "forcing.f", "custom law needs f");
  }
  if (monotonicity_exponent_) {
    require(*monotonicity_exponent_ > 1.0, ErrorCode::OutOfRange, "forcing.monotonicity_exponent",
            "exponent must exceed one");
  }
  check_monotone_nonnegative([this](double u) { return value(u); }, "forcing");
}

ForcingLaw ForcingLaw::power(double p, double lambda, double shift) {
  return ForcingLaw(PowerForcing{p, shift}, lambda, p > 1.0 ? std::optional<double>(p) : std::nullopt);
}

ForcingLaw ForcingLaw::exponential(double lambda) { return ForcingLaw(ExponentialForcing{}, lambda); }

ForcingLaw ForcingLaw::with_lambda(double lambda) const { return ForcingLaw(kind_, lambda, monotonicity_exponent_); }

double ForcingLaw::value(double u) const {
  return std::visit(Overloaded{
                        [u](const PowerForcing& k) {
                          const double base = k.shift + u;
                          return std::copysign(std::pow(std::abs(base), k.p), base);
                        },
                        [u](const ExponentialForcing&) { return std::exp(u); },
                        [u](const CustomForcing& k) { return k.f(u); },
                    },
                    kind_);
}

double ForcingLaw::derivative(double u) const {
  return std::visit(Overloaded{
                        [u](const PowerForcing& k) { return k.p * std::pow(std::abs(k.shift + u), k.p - 1.0); },
                        [u](const ExponentialForcing&) { return std::exp(u); },
                        [u](const CustomForcing& k) {
                          return k.derivative ? k.derivative(u) : central_difference(k.f, u);
                        },
                    },
                    kind_);
}

double phi(const ForcingLaw& law, double r) {
  require(r >= 0.0, ErrorCode::OutOfRange, "phi.r", "argument must be nonnegative");
  return std::visit(Overloaded{
                        [r](const PowerForcing& k) {
                          require(k.p > 1.0, ErrorCode::NotSuperlinear, "forcing.p", "p <= 1 has no finite tail");
                          const double base = k.shift + r;
                          require(base > 0.0, ErrorCode::OutOfRange, "phi.r", "Phi is infinite at this point");
                          return 1.0 / ((k.p - 1.0) * std::pow(base, k.p - 1.0));
                        },
                        [r](const ExponentialForcing&) { return std::exp(-r); },
                        [&law, r](const CustomForcing& k) {
                          if (k.phi) return k.phi(r);
                          require(law.value(r) > 0.0 || r > 0.0, ErrorCode::OutOfRange, "phi.r",
                                  "Phi is infinite at this point");
                          require(!tail_diverges([&law](double s) { return 1.0 / law.value(s); }, r),
                                  ErrorCode::NotSuperlinear, "forcing", "tail of 1/f diverges");
                          return forcing_phi_quadrature(law, r);
                        },
                    },
                    law.kind());
}

double phi_inv(const ForcingLaw& law, double z) {
  require(z > 0.0 && std::isfinite(z), ErrorCode::OutOfRange, "phi_inv.z", "argument must be positive");
  return std::visit(
      Overloaded{
          [z](const PowerForcing& k) {
            require(k.p > 1.0, ErrorCode::NotSuperlinear, "forcing.p", "p <= 1 has no finite tail");
            const double r = std::pow((k.p - 1.0) * z, -1.0 / (k.p - 1.0)) - k.shift;
            require(r >= -1e-12 * k.shift, ErrorCode::OutOfRange, "phi_inv.z", "target above Phi(0)");
            return std::max(r, 0.0);
          },
          [z](const ExponentialForcing&) {
            require(z <= 1.0, ErrorCode::OutOfRange, "phi_inv.z", "target above Phi(0)");
            return -std::log(z);
          },
          [&law, z](const CustomForcing& k) {
            if (k.phi_inv) return k.phi_inv(z);
            const bool finite_at_zero = law.value(0.0) > 0.0;
            const double probe = finite_at_zero ? 0.0 : 1.0;
            require(!tail_diverges([&law](double s) { return 1.0 / law.value(s); }, probe),
                    ErrorCode::NotSuperlinear, "forcing", "tail of 1/f diverges");
            auto value = [&](double r) { return k.phi ? k.phi(r) : forcing_phi_quadrature(law, r); };
            auto slope = [&](double r) { return -1.0 / law.value(r); };
            return invert_decreasing(value, slope, z, finite_at_zero ? 0.0 : 1e-300, "phi_inv.z");
          },
      },
      law.kind());
}

// ------------------------------------------------------------- AbsorptionLaw

AbsorptionLaw::AbsorptionLaw(Kind kind, std::optional<double> truncation)
    : kind_(std::move(kind)), truncation_(truncation) {
  if (const auto* power = std::get_if<PowerAbsorption>(&kind_)) {
    require(power->m > 0.0, ErrorCode::OutOfRange, "absorption.m", "exponent must be positive");
  }
  if (const auto* custom = std::get_if<CustomAbsorption>(&kind_)) {
    require(static_cast<bool>(custom->g), ErrorCode::OutOfRange, "absorption.g", "custom law needs g");
  }
  if (truncation_) {
    require(*truncation_ > 0.0, ErrorCode::OutOfRange, "absorption.truncation", "level must be positive");
  }
  check_monotone_nonnegative([this](double s) { return base_value(s); }, "absorption");
}

AbsorptionLaw AbsorptionLaw::power(double m) { return AbsorptionLaw(PowerAbsorption{m}); }
AbsorptionLaw AbsorptionLaw::exponential() { return AbsorptionLaw(ExpAbsorption{}); }
AbsorptionLaw AbsorptionLaw::s_exp_2s() { return AbsorptionLaw(SExp2SAbsorption{}); }

AbsorptionLaw AbsorptionLaw::zero() {
  AbsorptionLaw law(CustomAbsorption{[](double) { return 0.0; }, [](double) { return 0.0; },
                                     [](double) { return 0.0; }});
  law.zero_ = true;
  return law;
}

double AbsorptionLaw::base_value(double s) const {
  return std::visit(Overloaded{
                        [s](const PowerAbsorption& k) { return std::copysign(std::pow(std::abs(s), k.m), s); },
                        [s](const ExpAbsorption&) { return std::exp(s); },
                        [s](const SExp2SAbsorption&) { return s * std::exp(2.0 * s); },
                        [s](const CustomAbsorption& k) { return k.g(s); },
                    },
                    kind_);
}

double AbsorptionLaw::base_derivative(double s) const {
  return std::visit(Overloaded{
                        [s](const PowerAbsorption& k) { return k.m * std::pow(std::abs(s), k.m - 1.0); },
                        [s](const ExpAbsorption&) { return std::exp(s); },
                        [s](const SExp2SAbsorption&) { return (1.0 + 2.0 * s) * std::exp(2.0 * s); },
                        [s](const CustomAbsorption& k) {
                          return k.derivative ? k.derivative(s) : central_difference(k.g, s);
                        },
                    },
                    kind_);
}

double AbsorptionLaw::base_primitive(double s) const {
  return std::visit(Overloaded{
                        [s](const PowerAbsorption& k) { return std::pow(std::abs(s), k.m + 1.0) / (k.m + 1.0); },
                        [s](const ExpAbsorption&) { return std::expm1(s); },
                        [s](const SExp2SAbsorption&) {
                          if (std::abs(s) < 1e-2) {
                            // Series of int_0^s t e^{2t} dt avoids cancellation near zero.
                            double sum = 0.0;
                            double term = s * s;  // 2^n s^{n+2} / n!
                            for (int n = 0; n < 20; ++n) {
                              sum += term / (n + 2);
                              term *= 2.0 * s / (n + 1);
                            }
                            return sum;
                          }
                          return ((2.0 * s - 1.0) * std::exp(2.0 * s) + 1.0) / 4.0;
                        },
                        [this, s](const CustomAbsorption& k) {
                          if (k.primitive) return k.primitive(s);
                          return integrate([this](double x) { return base_value(x); }, 0.0, s).value;
                        },
                    },
                    kind_);
}

double AbsorptionLaw::value(double s) const {
  return base_value(truncation_ ? std::min(s, *truncation_) : s);
}

double AbsorptionLaw::derivative(double s) const {
  if (truncation_ && s > *truncation_) return 0.0;
  return base_derivative(s);
}

double AbsorptionLaw::primitive(double s) const {
  if (truncation_ && s > *truncation_) {
    return base_primitive(*truncation_) + base_value(*truncation_) * (s - *truncation_);
  }
  return base_primitive(s);
}

double psi(const AbsorptionLaw& law, double delta) {
  require(delta > 0.0, ErrorCode::OutOfRange, "psi.delta", "argument must be positive");
  require(!law.truncation() && !law.is_zero(), ErrorCode::KellerOssermanFails, "absorption",
          "truncated or vanishing absorption has no finite Keller-Osserman integral");
  return std::visit(Overloaded{
                        [delta](const PowerAbsorption& k) {
                          require(k.m > 1.0, ErrorCode::KellerOssermanFails, "absorption.m",
                                  "m <= 1 violates the Keller-Osserman condition");
                          return std::sqrt(2.0 * (k.m + 1.0)) / (k.m - 1.0) * std::pow(delta, -(k.m - 1.0) / 2.0);
                        },
                        [&law, delta](const auto&) {
                          require(!tail_diverges(
                                      [&law](double s) { return 1.0 / std::sqrt(2.0 * law.primitive(s)); }, delta),
                                  ErrorCode::KellerOssermanFails, "absorption", "tail of 1/sqrt(2G) diverges");
                          return absorption_psi_quadrature(law, delta);
                        },
                    },
                    law.kind());
}

double psi_inv(const AbsorptionLaw& law, double z) {
  require(z > 0.0 && std::isfinite(z), ErrorCode::OutOfRange, "psi_inv.z", "argument must be positive");
  require(!law.truncation() && !law.is_zero(), ErrorCode::KellerOssermanFails, "absorption",
          "truncated or vanishing absorption has no finite Keller-Osserman integral");
  return std::visit(Overloaded{
                        [z](const PowerAbsorption& k) {
                          require(k.m > 1.0, ErrorCode::KellerOssermanFails, "absorption.m",
                                  "m <= 1 violates the Keller-Osserman condition");
                          const double scale = std::sqrt(2.0 * (k.m + 1.0)) / (k.m - 1.0);
                          return std::pow(z / scale, -2.0 / (k.m - 1.0));
                        },
                        [&law, z](const auto&) {
                          require(!tail_diverges(
                                      [&law](double s) { return 1.0 / std::sqrt(2.0 * law.primitive(s)); }, 1.0),
                                  ErrorCode::KellerOssermanFails, "absorption", "tail of 1/sqrt(2G) diverges");
                          auto value = [&](double d) { return absorption_psi_quadrature(law, d); };
                          auto slope = [&](double d) { return -1.0 / std::sqrt(2.0 * law.primitive(d)); };
                          return invert_decreasing(value, slope, z, 1e-300, "psi_inv.z");
                        },
                    },
                    law.kind());
}

// -------------------------------------------------------------- TruncatedLaw

TruncatedLaw::TruncatedLaw(Base base, double level) : base_(std::move(base)), level_(level) {
  require(level > 0.0 && std::isfinite(level), ErrorCode::OutOfRange, "truncation.level", "level must be positive");
}

double TruncatedLaw::value(double u) const {
  const double x = std::min(u, level_);
  return std::visit([x](const auto& law) { return law.value(x); }, base_);
}

double TruncatedLaw::derivative(double u) const {
  if (u > level_) return 0.0;
  return std::visit([u](const auto& law) { return law.derivative(u); }, base_);
}

double TruncatedLaw::lipschitz_bound() const {
  double bound = 0.0;
  constexpr int kSamples = 512;
  for (int i = 0; i <= kSamples; ++i) {
    bound = std::max(bound, std::abs(derivative(level_ * i / kSamples)));
  }
  return bound;
}

double TruncatedLaw::lambda() const {
  if (const auto* forcing = std::get_if<ForcingLaw>(&base_)) return forcing->lambda();
  return 1.0;
}

AbsorptionLaw TruncatedLaw::as_absorption() const {
  const auto* absorption = std::get_if<AbsorptionLaw>(&base_);
  require(absorption != nullptr, ErrorCode::OutOfRange, "truncation.base", "base is not an absorption law");
  return AbsorptionLaw(absorption->kind(), level_);
}

TruncatedLaw truncate(const ForcingLaw& law, double level) { return TruncatedLaw(law, level); }
TruncatedLaw truncate(const AbsorptionLaw& law, double level) { return TruncatedLaw(law, level); }

// ---------------------------------------------------------------- domination

double domination_ratio(const ForcingLaw& f, const AbsorptionLaw& g, double tau) {
  const double two_g = 2.0 * g.primitive(tau);
  if (two_g <= 0.0) return kInf;
  return f.value(tau) / std::sqrt(two_g);
}

namespace {

enum class Trend { Increasing, Flat, Decreasing };

struct WindowSummary {
  Trend trend;
  double minimum;
};

WindowSummary summarise_window(const ForcingLaw& f, const AbsorptionLaw& g, double lower, double upper,
                               int per_decade) {
  std::vector<double> log_tau;
  std::vector<double> log_ratio;
  double minimum = kInf;
  bool overflow = false;
  bool vanished = false;
  for (double tau : log_grid(lower, upper, per_decade)) {
    const double ratio = domination_ratio(f, g, tau);
    if (std::isnan(ratio)) continue;
    minimum = std::min(minimum, ratio);
    if (std::isinf(ratio)) {
      overflow = true;
      continue;
    }
    if (ratio <= 0.0) {
      vanished = true;
      continue;
    }
    log_tau.push_back(std::log(tau));
    log_ratio.push_back(std::log(ratio));
  }
  if (log_tau.size() < 2) {
    return {overflow ? Trend::Increasing : Trend::Decreasing, minimum};
  }
  const double slope = fit_line(log_tau, log_ratio).slope;
  constexpr double kFlat = 1e-3;
  if (std::abs(slope) < kFlat && !overflow && !vanished) return {Trend::Flat, minimum};
  return {slope > 0.0 ? Trend::Increasing : Trend::Decreasing, minimum};
}

/// Largest probe point where the ratio is representable (both f and G finite or f alone overflowing).
double representable_upper(const ForcingLaw& f, const AbsorptionLaw& g, const ProbeGrid& probe) {
  double upper = probe.tau_max;
  while (upper > probe.tau_pivot && std::isnan(domination_ratio(f, g, upper))) upper /= 1.25;
  return upper;
}

}  // namespace

DominationReport domination_report(const ForcingLaw& f, const AbsorptionLaw& g, const ProbeGrid& probe) {
  require(probe.tau_min > 0.0 && probe.tau_min < probe.tau_pivot && probe.tau_pivot < probe.tau_max,
          ErrorCode::OutOfRange, "probe", "probe windows must be ordered");
  DominationReport report;
  const double upper = representable_upper(f, g, probe);
  const auto large =
      summarise_window(f, g, std::max(probe.tau_pivot, upper / 100.0), upper, probe.points_per_decade);
  switch (large.trend) {
    case Trend::Increasing:
      report.L_at_infinity = kInf;
      report.regime = DominationRegime::StrongDomination;
      break;
    case Trend::Flat:
      report.L_at_infinity = large.minimum;
      report.regime = DominationRegime::WeakDomination;
      break;
    case Trend::Decreasing:
      report.L_at_infinity = 0.0;
      report.regime = DominationRegime::NoDomination;
      break;
  }
  const auto small = summarise_window(f, g, probe.tau_min, std::min(probe.tau_pivot, probe.tau_min * 100.0),
                                      probe.points_per_decade);
  switch (small.trend) {
    case Trend::Increasing: report.L_near_zero = 0.0; break;  // ratio vanishes as tau -> 0
    case Trend::Flat: report.L_near_zero = small.minimum; break;
    case Trend::Decreasing: report.L_near_zero = kInf; break;
  }
  double grid_minimum = kInf;
  for (double tau : log_grid(probe.tau_min, upper, probe.points_per_decade)) {
    const double ratio = domination_ratio(f, g, tau);
    if (!std::isnan(ratio)) grid_minimum = std::min(grid_minimum, ratio);
  }
  report.L_star = std::min(report.L_near_zero, grid_minimum);
  report.L_zero = std::min(report.L_at_infinity, report.L_star);
  report.lambda_0 = report.L_zero > 0.0 ? 1.0 / report.L_zero : kInf;
  return report;
}

double restricted_threshold(const ForcingLaw& f, const AbsorptionLaw& g, double tau_minus, const ProbeGrid& probe) {
  require(tau_minus > 0.0, ErrorCode::OutOfRange, "tau_minus", "lower level must be positive");
  const auto report = domination_report(f, g, probe);
  double minimum = report.L_at_infinity;
  const double upper = std::max(probe.tau_max, 1e6 * tau_minus);
  for (double tau : log_grid(tau_minus, upper, probe.points_per_decade)) {
    const double ratio = domination_ratio(f, g, tau);
    if (!std::isnan(ratio)) minimum = std::min(minimum, ratio);
  }
  return minimum > 0.0 ? 1.0 / minimum : kInf;
}

double psi_ratio_probe(const AbsorptionLaw& g, double eta, const ProbeGrid& probe) {
  double worst = 0.0;
  for (double s : log_grid(probe.tau_pivot, probe.tau_max, probe.points_per_decade / 4 + 1)) {
    worst = std::max(worst, psi(g, eta * s) / psi(g, s));
  }
  return worst;
}

const char* to_string(DominationRegime regime) noexcept {
  switch (regime) {
    case DominationRegime::StrongDomination: return "StrongDomination";
    case DominationRegime::WeakDomination: return "WeakDomination";
    case DominationRegime::NoDomination: return "NoDomination";
  }
  return "Unknown";
}

}  // namespace blowup
