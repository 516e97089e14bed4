#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "blowup/neutral_control.hpp"
#include "blowup/nonlinearity.hpp"
#include "blowup/ode.hpp"
#include "blowup/radial_elliptic.hpp"
#include "blowup/trajectory.hpp"

namespace blowup {

struct EvolutionOptions {
  double cap = 1e4;
  double horizon = 0.0;            ///< 0: ten times the a priori blow-up bound
  OdeOptions ode{1e-10, 1e-12};
  GridOptions grid{0.0, 0.0, 1.02};  ///< h_bdry 0: min(1e-4 R, Psi(cap) / 200)
  DirichletOptions dirichlet{};
  std::vector<double> nus{1.1, 1.5, 2.0};
  bool force = false;              ///< run even when the domination gate fails
  bool certify = true;             ///< compare with the large solution and the subsolutions
};

struct Snapshot {
  double t = 0.0;
  double b = 0.0;
  Eigen::VectorXd u;
};

struct EvolutionCertificates {
  int flux_violations = 0;          ///< accepted steps with c < 0 or c > sqrt(2 G(b))
  double worst_flux_ratio = 0.0;    ///< max c / sqrt(2 G(b))
  int interior_violations = 0;      ///< nodes with u > U_inf
  int subsolution_violations = 0;   ///< nodes with psi_inv(nu (T - t + R - r)) > u
  double worst_subsolution_ratio = 0.0;  ///< max of subsolution / u
  bool confined = true;             ///< max_{r <= 0.9 R} u < U_inf(0.9 R) for all steps
  double interior_peak = 0.0;       ///< max_{r <= 0.9 R} u over all steps
  double large_at_09R = 0.0;
  bool checked_large = false;
  bool checked_subsolution = false;
};

struct BoundaryEvolution {
  ForcingLaw f;
  AbsorptionLaw g;
  double u0 = 0.0;
  RadialGrid grid;
  std::vector<double> times;
  std::vector<double> boundary_values;
  std::vector<double> fluxes;
  std::vector<Snapshot> snapshots;
  double T_inf_est = 0.0;
  double fitted_rate = 0.0;          ///< -d Phi(b) / dt over the last decade
  double psi_bound = 0.0;            ///< Psi(u0), or +inf without Keller-Osserman
  double gate_threshold = 0.0;       ///< lambda needed by the domination gate
  bool gate_passed = true;
  EvolutionCertificates certificates;
  [[nodiscard]] double boundary_slope(std::size_t k) const;  ///< b' = lambda f(b) - c at sample k
};

/// Boundary ODE b' = lambda f(b) - c(b), where c(b) = du/dr(R) of the steady interior with u(R) = b,
/// integrated until b reaches the cap. Throws DominationFailed when lambda is below the gate.
[[nodiscard]] BoundaryEvolution evolve_uncontrolled(const ForcingLaw& f, const AbsorptionLaw& g, double R, int N,
                                                    double u0, const EvolutionOptions& options = {});

struct RateSeries {
  std::vector<double> t;
  std::vector<double> phi_ratio;       ///< (i)   Phi(b) / (T - t)
  std::vector<double> upper_ratio;     ///< (ii)  b / Phi^{-1}(rate (T - t))
  std::vector<double> psi_ratio;       ///< (iii) b / Psi^{-1}(T - t)
  std::vector<double> two_sided_ratio; ///< (iv)  weak case only
  std::vector<double> power_scaled;    ///< b (T - t)^{1/(p-1)}, power forcing only
};

struct RateDiagnostics {
  DominationRegime regime = DominationRegime::NoDomination;
  double L = 0.0;
  double rate = 0.0;                  ///< lambda (strong) or (lambda L - 1) / L (weak)
  RateSeries series;
  double terminal_phi = 0.0;
  double terminal_upper = 0.0;
  double terminal_psi = 0.0;
  double terminal_two_sided = 0.0;
  double terminal_power_scaled = 0.0;
  double power_bound = 0.0;           ///< (1 / (lambda (p - 1)))^{1/(p-1)} (strong) or the weak coefficient
  int samples = 0;
};

/// Ratio series over the last decade before T_inf_est. Throws InsufficientDecade with fewer than ten
/// samples in that decade.
[[nodiscard]] RateDiagnostics rate_diagnostics(const BoundaryEvolution& evolution, const DominationReport& report);

struct ControlledBoundaryConfig {
  double eps_fraction = 0.1;   ///< eps = eps_fraction * T_inf_est
  double amplitude = 1.0;
  double gamma = 0.2;
  double q = 2.0;
  NeutralOptions neutral{};
  double horizon_factor = 3.0; ///< horizon = horizon_factor * T_inf_est
  int interior_stride = 5;     ///< reconstruct the interior at every k-th sample
  EvolutionOptions evolution{};
};

struct ControlledBoundary {
  BoundaryEvolution uncontrolled;
  SingularKernel kernel;
  NeutralSolution boundary;       ///< y on the control window, with the elliptic flux as absorption
  NeutralSolution comparison;     ///< V on the control window, same control, no absorption
  SingularFit fit;                ///< singular behaviour of y near T_inf
  double T_est = 0.0;             ///< blow-up time of the controlled boundary value
  PiecewiseTrajectory trajectory; ///< y on [0, horizon]
  PiecewiseTrajectory upper;      ///< V on the same samples
  double eps = 0.0;
  double knee = 0.0;
  double K_R = 0.0;               ///< sup c / sqrt(V) over the samples
  int comparison_violations = 0;  ///< samples (boundary or interior) with u > V
  int flux_violations = 0;
  int comparison_samples = 0;
  bool interior_finite = true;
};

/// Controlled dynamic-boundary problem: the boundary value follows the neutral equation with the
/// quasi-static flux as extra absorption, then the reflection and periodic machinery.
[[nodiscard]] ControlledBoundary evolve_controlled(const ForcingLaw& f, const AbsorptionLaw& g, double R, int N,
                                                   double u0, const ControlledBoundaryConfig& config = {});

}  // namespace blowup
