#include "blowup/harness/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "blowup/alekseev.hpp"
#include "blowup/dynamic_boundary.hpp"
#include "blowup/errors.hpp"
#include "blowup/harness/csv.hpp"
#include "blowup/neutral_control.hpp"
#include "blowup/radial_elliptic.hpp"
#include "blowup/scalar_blowup.hpp"
#include "blowup/selfsimilar.hpp"

namespace blowup::harness {

namespace {

std::string fmt(double x, int digits = 6) {
  std::ostringstream out;
  out.precision(digits);
  out << x;
  return out.str();
}

/// Long runs shared between criteria, computed on first use.
class Runs {
 public:
  const BoundaryEvolution& strong() {
    if (!strong_) strong_ = evolve_uncontrolled(ForcingLaw::power(3.0), AbsorptionLaw::power(3.0), 1.0, 3, 2.0);
    return *strong_;
  }
  const BoundaryEvolution& weak() {
    if (!weak_) weak_ = evolve_uncontrolled(ForcingLaw::power(2.0, 2.0), AbsorptionLaw::power(3.0), 1.0, 3, 2.0);
    return *weak_;
  }
  /// The run accepted just above the gate; its subsolution hypothesis does not hold (see notes in
  /// criterion 10), so only the flux bound is certified.
  const BoundaryEvolution& gate() {
    if (!gate_) {
      EvolutionOptions options;
      options.certify = false;
      gate_ = evolve_uncontrolled(ForcingLaw::power(2.0, 1.1 * std::sqrt(0.5)), AbsorptionLaw::power(3.0), 1.0, 3,
                                  1.0, options);
    }
    return *gate_;
  }
  const ControlledBoundary& controlled() {
    if (!controlled_)
      controlled_ = std::make_unique<ControlledBoundary>(
          evolve_controlled(ForcingLaw::power(3.0), AbsorptionLaw::power(3.0), 1.0, 3, 2.0));
    return *controlled_;
  }
  const ControlledBoundary& decoupled() {
    if (!decoupled_)
      decoupled_ = std::make_unique<ControlledBoundary>(
          evolve_controlled(ForcingLaw::power(2.0), AbsorptionLaw::zero(), 1.0, 3, 1.0));
    return *decoupled_;
  }

 private:
  std::optional<BoundaryEvolution> strong_, weak_, gate_;
  std::unique_ptr<ControlledBoundary> controlled_, decoupled_;
};

struct Outcome {
  bool passed;
  std::string detail;
};

Outcome square_law_explosion() {
  ControlConfig config;
  config.horizon = 4.0;
  const auto run = controlled_explosion(ForcingLaw::power(2.0), 1.0, config);
  const auto& path = run.trajectory;
  const auto norms = path.l1_norm_per_period();
  bool equal_norms = norms.size() == 2;
  for (double n : norms) equal_norms = equal_norms && std::isfinite(n) && std::abs(n / norms.front() - 1.0) <= 0.01;
  const bool time_ok = std::abs(run.T_est - 1.0) <= 1e-6;
  const bool span_ok = path.begin() == 0.0 && std::abs(path.end() - 4.0) <= 1e-12;
  const bool positive = path.min_value() > 0.0;
  const bool gamma_ok = std::abs(run.fit.gamma - 0.2) <= 0.02;
  return {time_ok && span_ok && positive && equal_norms && gamma_ok,
          "T_est " + fmt(run.T_est, 12) + ", span [" + fmt(path.begin()) + ", " + fmt(path.end()) + "], min " +
              fmt(path.min_value()) + ", L1/period " + (norms.empty() ? "-" : fmt(norms.front())) + " x" +
              std::to_string(norms.size()) + ", gamma " + fmt(run.fit.gamma, 4)};
}

Outcome power_times() {
  double worst = 0.0;
  int cells = 0;
  for (double p : {1.5, 2.0, 3.0})
    for (double lambda : {0.5, 1.0, 2.0})
      for (double u0 : {0.5, 1.0, 4.0}) {
        const double exact = 1.0 / (lambda * (p - 1.0) * std::pow(u0, p - 1.0));
        const auto run = integrate_until_blowup(ForcingLaw::power(p, lambda), u0);
        worst = std::max(worst, std::abs(run.T_est - exact) / exact);
        ++cells;
      }
  return {worst <= 1e-6, std::to_string(cells) + " cells, worst relative error " + fmt(worst, 3)};
}

Outcome representation() {
  const VectorField<1> square{[](const Vector<1>& y) { return Vector<1>(y[0] * y[0]); },
                              [](const Vector<1>& y) { return Matrix<1>::Constant(2.0 * y[0]); }};
  Matrix<2> A;
  A << 0.0, 1.0, -1.0, 0.0;
  const VectorField<2> rotation{[A](const Vector<2>& y) { return Vector<2>(A * y); },
                                [A](const Vector<2>&) { return A; }};
  const Perturbation<1> none = [](double, const Vector<1>&) { return Vector<1>::Zero().eval(); };
  const Perturbation<1> sine = [](double t, const Vector<1>&) { return Vector<1>(-std::sin(t)); };
  const Perturbation<2> linear = [](double, const Vector<2>& y) { return (0.3 * y).eval(); };
  const double r0 = verify_representation<1>(square, none, 0.0, Vector<1>(1.0), 0.5).max_residual;
  const double r1 = verify_representation<1>(square, sine, 0.0, Vector<1>(1.0), 0.5).max_residual;
  const double r2 = verify_representation<2>(rotation, linear, 0.0, Vector<2>(1.0, -0.5), 2.0).max_residual;
  const double residual = std::max({r0, r1, r2});

  // Sensitivity against central differences of the flow.
  const VectorField<2> pendulum{[](const Vector<2>& y) { return Vector<2>(y[1], -std::sin(y[0]) - 0.2 * y[1]); }, {}};
  const Vector<2> xi(0.5, 0.1);
  const double t = 3.0;
  const auto S = sensitivity<2>(pendulum, t, 0.0, xi);
  double sensitivity_error = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double delta = 1e-6 * (1.0 + std::abs(xi[k]));
    Vector<2> plus = xi, minus = xi;
    plus[k] += delta;
    minus[k] -= delta;
    const Vector<2> column = (flow<2>(pendulum, t, 0.0, plus) - flow<2>(pendulum, t, 0.0, minus)) / (2.0 * delta);
    sensitivity_error = std::max(sensitivity_error,
                                 (column - S.col(k)).cwiseAbs().maxCoeff() / (1.0 + S.col(k).cwiseAbs().maxCoeff()));
  }
  const double square_exact = 1.0 / ((1.0 - 0.6 * 0.8) * (1.0 - 0.6 * 0.8));
  const double square_sens = sensitivity<1>(square, 0.6, 0.0, Vector<1>(0.8))(0, 0);
  sensitivity_error = std::max(sensitivity_error, std::abs(square_sens / square_exact - 1.0));
  return {residual <= 1e-6 && sensitivity_error <= 1e-5,
          "residuals " + fmt(r0, 3) + " / " + fmt(r1, 3) + " / " + fmt(r2, 3) + ", sensitivity error " +
              fmt(sensitivity_error, 3)};
}

Outcome large_profiles() {
  auto band = [](const AbsorptionLaw& g, const std::function<double(double)>& reference) {
    const auto grid = RadialGrid::refined(1.0, 3);
    const auto large = large_solution(g, grid);
    double low = std::numeric_limits<double>::infinity();
    double high = 0.0;
    for (Eigen::Index i = 0; i + 1 < grid.size(); ++i) {
      const double d = 1.0 - grid.nodes[i];
      if (d > 1e-2) continue;
      const double ratio = large.profile.u[i] / reference(d);
      low = std::min(low, ratio);
      high = std::max(high, ratio);
    }
    return std::pair{low, high};
  };
  const auto [cubic_low, cubic_high] = band(AbsorptionLaw::power(3.0), [](double d) { return std::sqrt(2.0) / d; });
  const auto [exp_low, exp_high] = band(AbsorptionLaw::exponential(), [](double d) { return std::log(2.0 / (d * d)); });
  const bool cubic_ok = cubic_low >= 0.98 && cubic_high <= 1.02;
  const bool exp_ok = exp_low >= 0.95 && exp_high <= 1.05;
  return {cubic_ok && exp_ok, "u^3 ratio in [" + fmt(cubic_low) + ", " + fmt(cubic_high) + "], e^s ratio in [" +
                                  fmt(exp_low) + ", " + fmt(exp_high) + "]"};
}

Outcome boundary_blowup(Runs& runs) {
  const auto& run = runs.strong();
  const auto& cert = run.certificates;
  const double bound = std::sqrt(2.0) / 2.0;
  const bool time_ok = run.T_inf_est <= bound + 1e-3;
  const bool confined = cert.checked_large && cert.interior_violations == 0 && cert.confined;
  const bool below = cert.checked_subsolution && cert.subsolution_violations == 0;
  return {time_ok && confined && below,
          "T_inf_est " + fmt(run.T_inf_est, 8) + " <= Psi(2) " + fmt(bound, 8) + ", interior peak " +
              fmt(cert.interior_peak) + " < U_inf(0.9R) " + fmt(cert.large_at_09R) + ", subsolution violations " +
              std::to_string(cert.subsolution_violations)};
}

Outcome strong_rate(Runs& runs) {
  const auto& run = runs.strong();
  const auto rates = rate_diagnostics(run, domination_report(run.f, run.g));
  const bool upper = rates.terminal_power_scaled <= rates.power_bound * 1.05;
  const bool lower = rates.terminal_psi >= 0.95;
  return {upper && lower, "b (T-t)^{1/2} = " + fmt(rates.terminal_power_scaled) + " vs bound " +
                              fmt(rates.power_bound) + " x1.05 [" + (upper ? "ok" : "fail") +
                              "]; b / psi_inv(T-t) = " + fmt(rates.terminal_psi, 3) + " vs 0.95 [" +
                              (lower ? "ok" : "fail") + "]"};
}

Outcome weak_rate(Runs& runs) {
  const auto& run = runs.weak();
  const auto rates = rate_diagnostics(run, domination_report(run.f, run.g));
  const double ratio = rates.terminal_two_sided;
  return {ratio >= 0.95 && ratio <= 1.05, "terminal two-sided ratio " + fmt(ratio) + " (L " + fmt(rates.L) + ")"};
}

Outcome threshold(Runs& runs) {
  double worst = 0.0;
  for (double m : {2.0, 3.0, 5.0}) {
    const double p = 0.5 * (m + 1.0);
    const auto report = domination_report(ForcingLaw::power(p), AbsorptionLaw::power(m));
    worst = std::max(worst, std::abs(report.lambda_0 - std::sqrt(2.0 / (m + 1.0))));
  }
  const double lambda0 = std::sqrt(0.5);
  bool refused = false;
  try {
    (void)evolve_uncontrolled(ForcingLaw::power(2.0, 0.9 * lambda0), AbsorptionLaw::power(3.0), 1.0, 3, 1.0);
  } catch (const ContractError& error) {
    refused = error.code() == ErrorCode::DominationFailed;
  }
  const auto& accepted = runs.gate();
  const bool ok = worst <= 1e-10 && refused && accepted.gate_passed && std::isfinite(accepted.T_inf_est);
  return {ok, "lambda_0 error " + fmt(worst, 3) + ", 0.9 lambda_0 " + (refused ? "refused" : "NOT refused") +
                  ", 1.1 lambda_0 " + (accepted.gate_passed ? "accepted" : "refused") + " (T_inf_est " +
                  fmt(accepted.T_inf_est) + ")"};
}

Outcome comparison(Runs& runs) {
  const auto& controlled = runs.controlled();
  const auto& decoupled = runs.decoupled();
  const int comparisons = controlled.comparison_violations + decoupled.comparison_violations;
  const int samples = controlled.comparison_samples + decoupled.comparison_samples;
  int sub_violations = 0;
  int certified = 0;
  for (const auto* run : {&runs.strong(), &runs.weak(), &controlled.uncontrolled}) {
    if (!run->certificates.checked_subsolution) continue;
    sub_violations += run->certificates.subsolution_violations;
    ++certified;
  }
  const bool ok = comparisons == 0 && samples > 0 && sub_violations == 0 && certified == 3 &&
                  controlled.interior_finite && decoupled.interior_finite;
  return {ok, "u <= V: " + std::to_string(comparisons) + "/" + std::to_string(samples) +
                  " violations; subsolution: " + std::to_string(sub_violations) + " violations over " +
                  std::to_string(certified) + " certified runs (gate run at 1.1 lambda_0 not certified)"};
}

Outcome flux_bound(Runs& runs) {
  int violations = 0;
  std::size_t steps = 0;
  double worst = 0.0;
  for (const auto* run : {&runs.strong(), &runs.weak(), &runs.gate(), &runs.controlled().uncontrolled,
                          &runs.decoupled().uncontrolled}) {
    violations += run->certificates.flux_violations;
    worst = std::max(worst, run->certificates.worst_flux_ratio);
    steps += run->times.size();
  }
  violations += runs.controlled().flux_violations + runs.decoupled().flux_violations;
  return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(steps) +
                               " uncontrolled steps plus controlled samples, worst c / sqrt(2G) " + fmt(worst, 8)};
}

Outcome self_similar() {
  const SelfSimilarSolution sol(3.0);
  const auto samples = random_samples(sol, 3, 1000, 20260401u);
  const auto report = residual_check(sol, samples);
  const double scaling = std::max(scaling_invariance(sol, 2.0, samples), scaling_invariance(sol, 0.5, samples));
  const double forms = form_agreement(sol, samples);
  const double time_error = std::abs(sol.blowup_time(1.0) - (std::sqrt(2.0) + 1.0));
  const double boundary = std::max(report.profile_boundary, report.shifted_defect);
  const bool ok = report.interior <= 1e-8 && boundary <= 1e-8 && scaling <= 1e-12 && forms <= 1e-12 &&
                  time_error <= 1e-12;
  return {ok, "interior " + fmt(report.interior, 3) + ", boundary " + fmt(boundary, 3) + ", scaling " +
                  fmt(scaling, 3) + ", forms " + fmt(forms, 3) + ", T_inf(1) error " + fmt(time_error, 3)};
}

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;
  std::function<Outcome(Runs&)> check;
};

}  // namespace

std::vector<CriterionResult> run_acceptance(std::ostream* progress, const std::set<int>& only) {
  const std::vector<Criterion> criteria = {
      {1, "Square-law controlled explosion", 30.0, [](Runs&) { return square_law_explosion(); }},
      {2, "Power blow-up times", 20.0, [](Runs&) { return power_times(); }},
      {3, "Alekseev representation", 10.0, [](Runs&) { return representation(); }},
      {4, "Large-solution boundary profile", 60.0, [](Runs&) { return large_profiles(); }},
      {5, "Boundary blow-up and confinement", 120.0, boundary_blowup},
      {6, "Strong-domination rate", 120.0, strong_rate},
      {7, "Weak-domination two-sided rate", 120.0, weak_rate},
      {8, "Domination threshold", 120.0, threshold},
      {9, "Self-similar exactness", 5.0, [](Runs&) { return self_similar(); }},
      {10, "Comparison certificates", 240.0, comparison},
      {11, "Flux bound", 240.0, flux_bound},
  };
  Runs runs;
  std::vector<CriterionResult> results;
  for (const auto& criterion : criteria) {
    if (!only.empty() && !only.count(criterion.id)) continue;
    CriterionResult result{criterion.id, criterion.title, false, {}, 0.0};
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto outcome = criterion.check(runs);
      result.passed = outcome.passed;
      result.detail = outcome.detail;
    } catch (const std::exception& error) {
      result.detail = std::string("exception: ") + error.what();
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // Shared runs are charged to the first criterion that needs them.
    if (result.seconds > criterion.budget_seconds) {
      result.passed = false;
      result.detail += "; over the " + fmt(criterion.budget_seconds) + " s budget";
    }
    if (progress) *progress << format_line(result) << std::endl;
    results.push_back(std::move(result));
  }
  return results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  for (const auto& r : results)
    if (!r.passed) return false;
  return true;
}

std::string format_line(const CriterionResult& r) {
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.1f s", r.seconds);
  return std::string(r.passed ? "PASS" : "FAIL") + "  " + std::to_string(r.id) + ". " + r.title + ": " + r.detail +
         " [" + timing + "]";
}

void write_acceptance_csv(std::ostream& out, const std::vector<CriterionResult>& results) {
  CsvWriter csv(out, {{"criterion"}, {"title"}, {"status"}, {"detail"}, {"seconds"}});
  for (const auto& r : results)
    csv.row({static_cast<long long>(r.id), r.title, std::string(r.passed ? "PASS" : "FAIL"), r.detail, r.seconds});
}

}  // namespace blowup::harness
