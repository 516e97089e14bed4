#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace blowup {

/// Explicit travelling profile of -Delta u + u^m = 0 in the half space x_N > 0 with
/// u_t + du/dn = u^p on x_N = 0, in the balanced case 2p = m + 1:
///   u(x, t) = k_m [x_N - C t]_+^{-2/(m-1)},  H(eta) = k_m [eta_N - C]_+^{-2/(m-1)}.
/// An empty optional marks a point of the blow-up set.
class SelfSimilarSolution {
 public:
  /// Throws BadExponent unless m > 1.
  explicit SelfSimilarSolution(double m);
  /// Throws BadExponent unless m > 1 and 2p = m + 1.
  SelfSimilarSolution(double m, double p);

  [[nodiscard]] double m() const noexcept { return m_; }
  [[nodiscard]] double p() const noexcept { return p_; }
  [[nodiscard]] double k() const noexcept { return k_; }
  [[nodiscard]] double C() const noexcept { return C_; }
  /// Decay exponent q = 2/(m-1) = 1/(p-1).
  [[nodiscard]] double q() const noexcept { return q_; }
  /// Coefficient K of the blow-up-time form K [x_N/(sqrt(p)-1) - t]_+^{-1/(p-1)}.
  [[nodiscard]] double time_form_coefficient() const noexcept;

  /// eta holds (eta', eta_N); only eta_N matters.
  [[nodiscard]] std::optional<double> profile(const Eigen::VectorXd& eta) const;
  [[nodiscard]] std::optional<double> profile(double eta_N) const;
  /// Distance form k [x_N - C t]_+^{-q}.
  [[nodiscard]] std::optional<double> solution(double x_N, double t) const;
  [[nodiscard]] std::optional<double> solution(const Eigen::VectorXd& x, double t) const;
  /// Blow-up-time form K [T_inf(x_N) - t]_+^{-1/(p-1)}.
  [[nodiscard]] std::optional<double> solution_time_form(double x_N, double t) const;
  /// T_inf(x_N) = x_N / (sqrt(p) - 1).
  [[nodiscard]] double blowup_time(double x_N) const;
  /// Printed boundary defect for the domain x_N > R.
  [[nodiscard]] double gamma(double R, double t) const;

 private:
  double m_, p_, k_, C_, q_;
};

struct SelfSimilarSample {
  Eigen::VectorXd x;  ///< (x', x_N)
  double t = 1.0;
};

struct ResidualReport {
  double interior = 0.0;           ///< max |-Delta H + H^m| / H^m over the samples
  double profile_boundary = 0.0;   ///< max relative residual of the profile boundary identity at eta_N = 0
  double shifted_defect = 0.0;     ///< max |u_t + du/dn - u^p| / u^p at x_N = R
  double gamma_mismatch = 0.0;     ///< max |defect - gamma(t)| / |gamma(t)|
  int samples = 0;
};

/// Uniform samples with x' in [-extent, extent]^{N-1}, x_N in (C t, C t + extent] off the blow-up
/// set, and t in (0, t_max].
[[nodiscard]] std::vector<SelfSimilarSample> random_samples(const SelfSimilarSolution& sol, int N, int count,
                                                            unsigned seed, double extent = 4.0,
                                                            double t_max = 4.0);

/// Analytic residuals of the profile system and of the dynamic condition on x_N = R, with R the
/// sample's x_N and t shifted inside (0, T_inf(R)). Throws SampleOnSingularSet when a sample has
/// x_N <= C t.
[[nodiscard]] ResidualReport residual_check(const SelfSimilarSolution& sol,
                                            const std::vector<SelfSimilarSample>& samples);

/// max |mu^q u(mu x, mu t) - u(x, t)| / u(x, t) over the samples.
[[nodiscard]] double scaling_invariance(const SelfSimilarSolution& sol, double mu,
                                        const std::vector<SelfSimilarSample>& samples);

/// max relative gap between the distance form and the blow-up-time form.
[[nodiscard]] double form_agreement(const SelfSimilarSolution& sol, const std::vector<SelfSimilarSample>& samples);

}  // namespace blowup
