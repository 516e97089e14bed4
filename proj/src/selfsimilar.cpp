#include "blowup/selfsimilar.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "blowup/errors.hpp"

namespace blowup {

namespace {

// Powers of a negative base continued through the upper half plane: z^a = |z|^a e^{i pi a}.
std::complex<double> continued_pow(double base, double exponent) {
  const double modulus = std::pow(std::abs(base), exponent);
  if (base >= 0.0) return {modulus, 0.0};
  return std::polar(modulus, std::numbers::pi * exponent);
}

double relative(double defect, double scale) { return scale > 0.0 ? std::abs(defect) / scale : std::abs(defect); }

}  // namespace

SelfSimilarSolution::SelfSimilarSolution(double m) : SelfSimilarSolution(m, 0.5 * (m + 1.0)) {}

SelfSimilarSolution::SelfSimilarSolution(double m, double p) : m_(m), p_(p) {
  require(m > 1.0 && std::isfinite(m), ErrorCode::BadExponent, "selfsim.m", "needs m > 1");
  require(std::abs(2.0 * p - (m + 1.0)) <= 1e-14 * (m + 1.0), ErrorCode::BadExponent, "selfsim.p",
          "exact self-similarity needs 2p = m + 1");
  q_ = 2.0 / (m - 1.0);
  k_ = std::pow(2.0 * (m + 1.0) / ((m - 1.0) * (m - 1.0)), 1.0 / (m - 1.0));
  C_ = 0.5 * (std::sqrt(2.0 * (m + 1.0)) - 2.0);
}

double SelfSimilarSolution::time_form_coefficient() const noexcept {
  const double root = std::sqrt(p_);
  return std::pow(root / ((p_ - 1.0) * (root - 1.0)), 1.0 / (p_ - 1.0));
}

std::optional<double> SelfSimilarSolution::profile(double eta_N) const {
  const double gap = eta_N - C_;
  if (gap <= 0.0) return std::nullopt;
  return k_ * std::pow(gap, -q_);
}

std::optional<double> SelfSimilarSolution::profile(const Eigen::VectorXd& eta) const {
  return profile(eta(eta.size() - 1));
}

std::optional<double> SelfSimilarSolution::solution(double x_N, double t) const {
  const double gap = x_N - C_ * t;
  if (gap <= 0.0) return std::nullopt;
  return k_ * std::pow(gap, -q_);
}

std::optional<double> SelfSimilarSolution::solution(const Eigen::VectorXd& x, double t) const {
  return solution(x(x.size() - 1), t);
}

std::optional<double> SelfSimilarSolution::solution_time_form(double x_N, double t) const {
  const double remaining = blowup_time(x_N) - t;
  if (remaining <= 0.0) return std::nullopt;
  return time_form_coefficient() * std::pow(remaining, -1.0 / (p_ - 1.0));
}

double SelfSimilarSolution::blowup_time(double x_N) const { return x_N / (std::sqrt(p_) - 1.0); }

double SelfSimilarSolution::gamma(double R, double t) const {
  const double root = std::sqrt(p_);
  const double remaining = std::max(blowup_time(R) - t, 0.0);
  return time_form_coefficient() * (root - (p_ + 1.0)) / ((p_ - 1.0) * (root - 1.0)) *
         std::pow(remaining, -p_ / (p_ - 1.0));
}

std::vector<SelfSimilarSample> random_samples(const SelfSimilarSolution& sol, int N, int count, unsigned seed,
                                              double extent, double t_max) {
  require(N >= 1, ErrorCode::OutOfRange, "selfsim.N", "dimension must be positive");
  require(extent > 0.0 && t_max > 0.0, ErrorCode::OutOfRange, "selfsim.extent", "sampling box must be non-empty");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> tangential(-extent, extent);
  std::uniform_real_distribution<double> clearance(0.05 * extent, extent);
  std::uniform_real_distribution<double> time(0.0, t_max);
  std::vector<SelfSimilarSample> samples(static_cast<std::size_t>(count));
  for (auto& sample : samples) {
    sample.x.resize(N);
    for (int i = 0; i + 1 < N; ++i) sample.x(i) = tangential(rng);
    do sample.t = time(rng);
    while (sample.t <= 0.0);
    sample.x(N - 1) = sol.C() * sample.t + clearance(rng);
  }
  return samples;
}

ResidualReport residual_check(const SelfSimilarSolution& sol, const std::vector<SelfSimilarSample>& samples) {
  const double k = sol.k(), q = sol.q(), m = sol.m(), p = sol.p(), C = sol.C();
  ResidualReport report;
  for (const auto& sample : samples) {
    const double x_N = sample.x(sample.x.size() - 1);
    const double t = sample.t;
    require(t > 0.0 && x_N - C * t > 0.0, ErrorCode::SampleOnSingularSet, "selfsim.sample",
            "sample lies in the blow-up set x_N <= C t");

    // Interior: H at eta = x / t; only eta_N enters the Laplacian.
    const double gap = x_N / t - C;
    const double laplacian = k * q * (q + 1.0) * std::pow(gap, -q - 2.0);
    const double absorption = std::pow(k * std::pow(gap, -q), m);
    report.interior = std::max(report.interior, relative(-laplacian + absorption, absorption));

    // Profile identity at eta = (x'/t, 0), with the tangential terms eta_i D_i H = 0.
    const std::complex<double> H = k * continued_pow(-C, -q);
    const std::complex<double> DN = -q * k * continued_pow(-C, -q - 1.0);
    const std::complex<double> Hp = std::pow(k, p) * continued_pow(-C, -q * p);
    const std::complex<double> identity = -DN - H / (p - 1.0) - Hp;
    const double scale = std::max({std::abs(DN), std::abs(H) / (p - 1.0), std::abs(Hp)});
    report.profile_boundary = std::max(report.profile_boundary, std::abs(identity) / scale);

    // Dynamic condition on the shifted boundary x_N = R with outward normal -e_N.
    const double R = x_N;
    const double d = R - C * t;
    const double u_t = q * k * C * std::pow(d, -q - 1.0);
    const double u_n = q * k * std::pow(d, -q - 1.0);
    const double forcing = std::pow(k * std::pow(d, -q), p);
    const double defect = u_t + u_n - forcing;
    report.shifted_defect = std::max(report.shifted_defect, relative(defect, forcing));
    const double printed = sol.gamma(R, t);
    report.gamma_mismatch = std::max(report.gamma_mismatch, relative(defect - printed, std::abs(printed)));
    ++report.samples;
  }
  return report;
}

double scaling_invariance(const SelfSimilarSolution& sol, double mu, const std::vector<SelfSimilarSample>& samples) {
  require(mu > 0.0, ErrorCode::OutOfRange, "selfsim.mu", "scaling factor must be positive");
  const double weight = std::pow(mu, sol.q());
  double worst = 0.0;
  for (const auto& sample : samples) {
    const auto base = sol.solution(sample.x, sample.t);
    const auto scaled = sol.solution(Eigen::VectorXd(mu * sample.x), mu * sample.t);
    if (!base || !scaled) {
      if (base.has_value() != scaled.has_value()) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, relative(weight * *scaled - *base, *base));
  }
  return worst;
}

double form_agreement(const SelfSimilarSolution& sol, const std::vector<SelfSimilarSample>& samples) {
  double worst = 0.0;
  for (const auto& sample : samples) {
    const double x_N = sample.x(sample.x.size() - 1);
    const auto distance = sol.solution(x_N, sample.t);
    const auto timed = sol.solution_time_form(x_N, sample.t);
    if (distance.has_value() != timed.has_value()) return std::numeric_limits<double>::infinity();
    if (distance) worst = std::max(worst, relative(*timed - *distance, *distance));
  }
  return worst;
}

}  // namespace blowup
