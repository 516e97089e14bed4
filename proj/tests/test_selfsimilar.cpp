#include <doctest.h>

#include <cmath>

#include "blowup/errors.hpp"
#include "blowup/selfsimilar.hpp"

using namespace blowup;

TEST_CASE("constants of the cubic case") {
  const SelfSimilarSolution sol(3.0);
  CHECK(sol.p() == 2.0);
  CHECK(sol.k() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(sol.C() == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-15));
  CHECK(sol.q() == 1.0);
  CHECK(sol.time_form_coefficient() == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-15));
  CHECK(std::abs(sol.blowup_time(1.0) - (std::sqrt(2.0) + 1.0)) <= 1e-12);
}

TEST_CASE("profile values and the blow-up set") {
  const SelfSimilarSolution sol(3.0);
  CHECK(*sol.profile(std::sqrt(2.0)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(*sol.profile(sol.C() + 2.0) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-14));
  CHECK_FALSE(sol.profile(sol.C()).has_value());
  CHECK_FALSE(sol.profile(0.0).has_value());
  Eigen::VectorXd eta(3);
  eta << 5.0, -7.0, std::sqrt(2.0);
  CHECK(*sol.profile(eta) == *sol.profile(std::sqrt(2.0)));

  const double T = sol.blowup_time(1.0);
  CHECK(sol.solution(1.0, 0.999 * T).has_value());
  CHECK_FALSE(sol.solution(1.0, T).has_value());
  CHECK_FALSE(sol.solution_time_form(1.0, 2.0 * T).has_value());
  // The blown-up region {x_N <= C t} grows linearly.
  CHECK(sol.blowup_time(2.0) == doctest::Approx(2.0 * sol.blowup_time(1.0)));
}

TEST_CASE("rejects exponents outside the balanced case") {
  auto code = [](double m, double p) {
    try {
      (void)SelfSimilarSolution(m, p);
    } catch (const ContractError& error) {
      return error.code();
    }
    return ErrorCode::OutOfRange;
  };
  CHECK(code(1.0, 1.0) == ErrorCode::BadExponent);
  CHECK(code(3.0, 2.5) == ErrorCode::BadExponent);
  CHECK_NOTHROW((void)SelfSimilarSolution(5.0, 3.0));
}

TEST_CASE("residuals vanish on random samples") {
  for (double m : {3.0, 2.0, 5.0, 7.5}) {
    const SelfSimilarSolution sol(m);
    const auto samples = random_samples(sol, 3, 1000, 20260401u);
    const auto report = residual_check(sol, samples);
    CAPTURE(m);
    CHECK(report.samples == 1000);
    CHECK(report.interior <= 1e-8);
    CHECK(report.profile_boundary <= 1e-8);
    CHECK(report.shifted_defect <= 1e-8);
  }
}

TEST_CASE("boundary defect on the shifted domain against the printed gamma") {
  const SelfSimilarSolution sol(3.0);
  const double R = 1.0;
  const double t = 0.5 * sol.blowup_time(R);
  const double remaining = sol.blowup_time(R) - t;
  const double coefficient = (2.0 + std::sqrt(2.0)) * (std::sqrt(2.0) - 3.0) / (std::sqrt(2.0) - 1.0);
  CHECK(sol.gamma(R, t) == doctest::Approx(coefficient / (remaining * remaining)).epsilon(1e-13));

  Eigen::VectorXd x(2);
  x << 0.3, R;
  const auto report = residual_check(sol, {{x, t}});
  // The closed form satisfies the dynamic condition exactly, so the printed defect is not reproduced.
  CHECK(report.shifted_defect <= 1e-14);
  CHECK(report.gamma_mismatch == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd inside(1);
  inside << 0.1;
  CHECK_THROWS_AS((void)residual_check(sol, {{inside, 1.0}}), ContractError);
}

TEST_CASE("scaling invariance and agreement of the two forms") {
  const SelfSimilarSolution sol(3.0);
  const auto samples = random_samples(sol, 3, 1000, 7u);
  CHECK(scaling_invariance(sol, 1.0, samples) == 0.0);
  CHECK(scaling_invariance(sol, 2.0, samples) <= 1e-13);
  CHECK(scaling_invariance(sol, 0.5, samples) <= 1e-13);
  CHECK(form_agreement(sol, samples) <= 1e-12);

  const SelfSimilarSolution wide(6.0);
  const auto others = random_samples(wide, 2, 1000, 11u);
  CHECK(scaling_invariance(wide, 3.7, others) <= 1e-12);
  CHECK(form_agreement(wide, others) <= 1e-12);
}
