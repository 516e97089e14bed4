#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "blowup/alekseev.hpp"
#include "blowup/nonlinearity.hpp"
#include "blowup/scalar_blowup.hpp"
#include "blowup/trajectory.hpp"

namespace blowup {

/// B(t) = a |t - t*|^{-gamma} + m(t) in the shifted time of the delay equation.
class SingularKernel {
 public:
  SingularKernel(double a, double gamma, double t_star, double tau, double offset);

  [[nodiscard]] double amplitude() const noexcept { return a_; }
  [[nodiscard]] double gamma() const noexcept { return gamma_; }
  [[nodiscard]] double t_star() const noexcept { return t_star_; }
  [[nodiscard]] double delay() const noexcept { return tau_; }
  [[nodiscard]] double offset() const noexcept { return offset_; }

  [[nodiscard]] double value(double t) const;
  [[nodiscard]] double derivative(double t) const;
  /// int_0^t B(s) ds, finite across t* because gamma < 1.
  [[nodiscard]] double primitive(double t) const;
  [[nodiscard]] double cell_average(double t0, double t1) const;

 private:
  double a_;
  double gamma_;
  double t_star_;
  double tau_;
  double offset_;
};

/// Kernel for blow-up time T_inf and window eps: delay tau = T_inf - eps, t* = eps and the constant
/// offset -a / t*^gamma that makes B(0) = 0. Throws BadWindow / BadExponent.
[[nodiscard]] SingularKernel build_kernel(double q, double a, double gamma, double eps, double T_inf);

/// The control alpha = B'(t - tau) w(t - tau), kept as an antiderivative because alpha is not
/// integrable near the singular time. Times are original (unshifted).
class ControlSchedule {
 public:
  ControlSchedule(SingularKernel kernel, std::function<double(double)> w, std::function<double(double)> w_prime,
                  double T_inf);

  /// A(t) = int_0^t alpha, regularised across T_inf by integration by parts.
  [[nodiscard]] double antiderivative(double t) const;
  /// Antiderivative of the reflected control, normalised to vanish at 2 T_inf.
  [[nodiscard]] double reflected_antiderivative(double t) const;
  [[nodiscard]] std::pair<double, double> active_window() const;
  /// Pointwise control away from T_inf (zero outside the window); for diagnostics only.
  [[nodiscard]] double pointwise(double t) const;
  /// Reflected control -alpha(2 T_inf - t) on [T_inf, 2 T_inf].
  [[nodiscard]] double reflected_pointwise(double t) const;
  /// +1 where the forcing acts as a source, -1 on the mirrored half period where it absorbs.
  [[nodiscard]] int sign(double t) const;
  [[nodiscard]] const SingularKernel& kernel() const noexcept { return kernel_; }

 private:
  SingularKernel kernel_;
  std::function<double(double)> w_;
  std::function<double(double)> w_prime_;
  double T_inf_;
};

struct NeutralOptions {
  int base_intervals = 200;
  double refinement_ratio = 0.8;
  double min_gap = 1e-8;
  double tolerance = 1e-8;
  int max_iterations = 200;
};

/// Additional state-dependent absorption c(t, z) in z' = h(z) - c(t, z) + alpha.
using Absorption = std::function<double(double, double)>;

struct NeutralSolution {
  std::vector<double> t;        ///< shifted times in [0, tau], t* excluded
  std::vector<double> z;
  std::vector<double> regular;  ///< z - B w, the absolutely continuous part
  std::size_t last_before_singularity = 0;
  double weighted_norm = 0.0;   ///< max |t - t*|^gamma |z|
  int iterations = 0;
  std::vector<double> residual_history;
};

/// Solves the neutral equation through its variation-of-constants representation
///   z(t) = y0(t) + B(t) w(t) - int_0^t B(s) d/ds[Phi(t, s, z(s)) w(s)] ds - int_0^t Phi c ds,
/// with w(t) = history(t - tau), by Picard iteration in the |t - t*|^gamma weighted sup norm.
[[nodiscard]] NeutralSolution solve_neutral(const TruncatedLaw& forcing, const std::function<double(double)>& history,
                                            const SingularKernel& kernel, const NeutralOptions& options = {},
                                            std::optional<double> initial_value = {},
                                            const Absorption& absorption = {});

struct SingularFit {
  double gamma = 0.0;        ///< exponent with the singular time fixed at t*
  double prefactor = 0.0;    ///< A in z ~ A |t - t*|^{-gamma}
  double T_est = 0.0;        ///< singular time fitted freely (shifted time)
  double gamma_free = 0.0;   ///< exponent from the free fit
  int samples = 0;
};

/// Fits the last decade of z before t* from finite differences of z.
[[nodiscard]] SingularFit fit_singularity(const NeutralSolution& solution, const SingularKernel& kernel);

struct ControlConfig {
  double eps = 0.125;
  double amplitude = 1.0;
  double gamma = 0.2;
  double q = 2.0;
  std::optional<double> knee;  ///< defaults to u0(T_inf - eps)
  NeutralOptions neutral{};
  int original_intervals = 200;
  double horizon = 0.0;        ///< 0: one period
  bool uncontrolled_tail = false;  ///< no control and no truncation: continue u0 up to T_inf
};

struct ControlledExplosion {
  BlowupSolution uncontrolled;
  SingularKernel kernel;
  std::optional<ControlSchedule> schedule;
  NeutralSolution neutral;
  SingularFit fit;
  double knee = 0.0;
  double T_est = 0.0;           ///< original time
  double regular_bound = 0.0;   ///< max |z - B w| on [0, tau]
  PiecewiseTrajectory trajectory;
};

/// Original solution on [0, tau], controlled growth on (tau, T_inf), mirror image on [T_inf, 2 T_inf]
/// and periodic copies up to the horizon.
[[nodiscard]] ControlledExplosion controlled_explosion(const ForcingLaw& law, double u0, const ControlConfig& config);

/// Y(t) = u(2 T_inf - t) built from the segments of u on [0, T_inf).
[[nodiscard]] TrajectorySegment reflect(const PiecewiseTrajectory& forward, double T_inf);

/// Tiles [0, horizon] with copies of a template on [0, period]; throws TemplateMismatch if the
/// template does not close.
[[nodiscard]] PiecewiseTrajectory periodic_extend(const PiecewiseTrajectory& period_template, double horizon);

/// sup |u_alpha(t) - u0(t)| over samples with t <= T_inf - eps (0 for an empty window).
[[nodiscard]] double coincidence_check(const PiecewiseTrajectory& controlled, const BlowupSolution& uncontrolled,
                                       double eps);

/// Shifted-time grid on [0, tau] refined geometrically towards t* from both sides.
[[nodiscard]] std::vector<double> singular_grid(double tau, double t_star, const NeutralOptions& options,
                                                std::size_t* last_before = nullptr);

}  // namespace blowup
