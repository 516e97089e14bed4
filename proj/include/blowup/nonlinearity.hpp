#pragma once

#include <optional>
#include <variant>

#include "blowup/quadrature.hpp"

namespace blowup {

struct PowerForcing {
  double p = 2.0;
  double shift = 0.0;  ///< f(u) = (shift + u)^p
};
struct ExponentialForcing {};
/// User-supplied forcing; the optional closed forms bypass quadrature and inversion.
struct CustomForcing {
  ScalarFunction f;
  ScalarFunction derivative;  ///< empty: central differences
  ScalarFunction phi;         ///< empty: tail quadrature
  ScalarFunction phi_inv;     ///< empty: monotone inversion
};

/// Forcing term lambda * f(u) of the scalar and boundary equations.
class ForcingLaw {
 public:
  using Kind = std::variant<PowerForcing, ExponentialForcing, CustomForcing>;

  /// Throws OutOfRange if lambda <= 0 or f is negative / decreasing on the probe grid.
  explicit ForcingLaw(Kind kind, double lambda = 1.0, std::optional<double> monotonicity_exponent = {});

  static ForcingLaw power(double p, double lambda = 1.0, double shift = 0.0);
  static ForcingLaw exponential(double lambda = 1.0);

  [[nodiscard]] double value(double u) const;
  [[nodiscard]] double derivative(double u) const;
  [[nodiscard]] double lambda() const noexcept { return lambda_; }
  [[nodiscard]] const Kind& kind() const noexcept { return kind_; }
  [[nodiscard]] std::optional<double> monotonicity_exponent() const noexcept { return monotonicity_exponent_; }
  [[nodiscard]] ForcingLaw with_lambda(double lambda) const;

 private:
  Kind kind_;
  double lambda_;
  std::optional<double> monotonicity_exponent_;
};

struct PowerAbsorption {
  double m = 3.0;
};
struct ExpAbsorption {};
struct SExp2SAbsorption {};  ///< g(s) = s e^{2s}
struct CustomAbsorption {
  ScalarFunction g;
  ScalarFunction derivative;  ///< empty: central differences
  ScalarFunction primitive;   ///< empty: quadrature of g over [0, s]
};

/// Interior absorption g with primitive G; optionally frozen above a truncation level.
class AbsorptionLaw {
 public:
  using Kind = std::variant<PowerAbsorption, ExpAbsorption, SExp2SAbsorption, CustomAbsorption>;

  explicit AbsorptionLaw(Kind kind, std::optional<double> truncation = {});

  static AbsorptionLaw power(double m);
  static AbsorptionLaw exponential();
  static AbsorptionLaw s_exp_2s();
  /// The identically vanishing absorption (decoupled interior).
  static AbsorptionLaw zero();

  [[nodiscard]] double value(double s) const;
  [[nodiscard]] double derivative(double s) const;
  [[nodiscard]] double primitive(double s) const;
  [[nodiscard]] const Kind& kind() const noexcept { return kind_; }
  [[nodiscard]] std::optional<double> truncation() const noexcept { return truncation_; }
  [[nodiscard]] bool is_zero() const noexcept { return zero_; }

 private:
  [[nodiscard]] double base_value(double s) const;
  [[nodiscard]] double base_derivative(double s) const;
  [[nodiscard]] double base_primitive(double s) const;

  Kind kind_;
  std::optional<double> truncation_;
  bool zero_ = false;
};

/// Phi(r) = int_r^inf ds / f(s). Throws NotSuperlinear for a divergent tail.
[[nodiscard]] double phi(const ForcingLaw& law, double r);
/// Inverse of phi. Throws OutOfRange outside the range of phi.
[[nodiscard]] double phi_inv(const ForcingLaw& law, double z);
/// Psi(delta) = int_delta^inf ds / sqrt(2 G(s)). Throws KellerOssermanFails for a divergent tail.
[[nodiscard]] double psi(const AbsorptionLaw& law, double delta);
/// Inverse of psi. Throws OutOfRange outside the range of psi.
[[nodiscard]] double psi_inv(const AbsorptionLaw& law, double z);

/// Frozen-above-a-level copy of a forcing or absorption law.
class TruncatedLaw {
 public:
  using Base = std::variant<ForcingLaw, AbsorptionLaw>;

  TruncatedLaw(Base base, double level);

  [[nodiscard]] double value(double u) const;
  [[nodiscard]] double derivative(double u) const;
  [[nodiscard]] double level() const noexcept { return level_; }
  [[nodiscard]] const Base& base() const noexcept { return base_; }
  /// Largest derivative of the base on [0, level], probed on a grid.
  [[nodiscard]] double lipschitz_bound() const;
  /// Multiplier of the forcing base (1 for an absorption base).
  [[nodiscard]] double lambda() const;
  /// Absorption with truncated primitive; throws OutOfRange when the base is a forcing law.
  [[nodiscard]] AbsorptionLaw as_absorption() const;

 private:
  Base base_;
  double level_;
};

[[nodiscard]] TruncatedLaw truncate(const ForcingLaw& law, double level);
[[nodiscard]] TruncatedLaw truncate(const AbsorptionLaw& law, double level);

enum class DominationRegime { StrongDomination, WeakDomination, NoDomination };

struct ProbeGrid {
  double tau_min = 1e-6;
  double tau_pivot = 1.0;
  double tau_max = 1e6;
  int points_per_decade = 20;
};

struct DominationReport {
  double L_at_infinity = 0.0;
  double L_near_zero = 0.0;
  double L_star = 0.0;
  double L_zero = 0.0;
  double lambda_0 = 0.0;
  DominationRegime regime = DominationRegime::NoDomination;
};

/// Ratio f(tau) / sqrt(2 G(tau)); +inf when G vanishes.
[[nodiscard]] double domination_ratio(const ForcingLaw& f, const AbsorptionLaw& g, double tau);
[[nodiscard]] DominationReport domination_report(const ForcingLaw& f, const AbsorptionLaw& g,
                                                 const ProbeGrid& probe = {});
/// Threshold 1 / inf_{tau >= tau_minus} f/sqrt(2G): the domination needed along trajectories
/// that never go below tau_minus.
[[nodiscard]] double restricted_threshold(const ForcingLaw& f, const AbsorptionLaw& g, double tau_minus,
                                          const ProbeGrid& probe = {});
/// Largest Psi(eta s) / Psi(s) on the probe grid; a diagnostic for the limsup < 1 assumption.
[[nodiscard]] double psi_ratio_probe(const AbsorptionLaw& g, double eta, const ProbeGrid& probe = {});

[[nodiscard]] const char* to_string(DominationRegime regime) noexcept;

}  // namespace blowup
