#include <doctest.h>

#include <cmath>
#include <random>

#include "blowup/errors.hpp"
#include "blowup/neutral_control.hpp"

using namespace blowup;

namespace {

const ControlledExplosion& square_law_run() {
  static const ControlledExplosion run = [] {
    ControlConfig config;
    config.horizon = 6.0;
    return controlled_explosion(ForcingLaw::power(2.0), 1.0, config);
  }();
  return run;
}

ErrorCode code_of(const std::function<void()>& action) {
  try {
    action();
  } catch (const ContractError& error) {
    return error.code();
  }
  return ErrorCode::OutOfRange;  // unreachable in the tests below
}

}  // namespace

TEST_CASE("kernel vanishes at the origin and blows up at t*") {
  const auto kernel = build_kernel(2.0, 1.0, 0.2, 0.125, 1.0);
  CHECK(kernel.delay() == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(kernel.t_star() == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(std::abs(kernel.value(0.0)) < 1e-14);
  CHECK(kernel.offset() == doctest::Approx(-std::pow(8.0, 0.2)).epsilon(1e-14));
  CHECK(kernel.value(0.1) == doctest::Approx(std::pow(0.025, -0.2) - std::pow(8.0, 0.2)).epsilon(1e-14));
  CHECK(std::isinf(kernel.value(0.125)));
  // Primitive differentiates back to B.
  for (double t : {0.05, 0.11, 0.2, 0.7}) {
    const double h = 1e-6;
    const double slope = (kernel.primitive(t + h) - kernel.primitive(t - h)) / (2 * h);
    CHECK(slope == doctest::Approx(kernel.value(t)).epsilon(1e-8));
  }
  CHECK(kernel.primitive(0.0) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("kernel rejects bad windows and exponents") {
  CHECK(code_of([] { (void)build_kernel(2.0, 1.0, 0.2, 0.6, 1.0); }) == ErrorCode::BadWindow);
  CHECK(code_of([] { (void)build_kernel(2.0, 1.0, 0.9, 0.125, 1.0); }) == ErrorCode::BadExponent);
  CHECK(code_of([] { (void)build_kernel(2.0, 1.0, 0.0, 0.125, 1.0); }) == ErrorCode::BadExponent);
}

TEST_CASE("grid brackets t* geometrically from both sides") {
  std::size_t last = 0;
  const auto grid = singular_grid(0.875, 0.125, {}, &last);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(grid[last] < 0.125);
  CHECK(grid[last + 1] > 0.125);
  CHECK(0.125 - grid[last] >= 1e-8);
  CHECK(0.125 - grid[last] < 1.25e-8);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) CHECK(grid[i] < grid[i + 1]);
}

TEST_CASE("square law: regular part stays bounded and converges") {
  const auto& run = square_law_run();
  CHECK(run.knee == doctest::Approx(8.0).epsilon(1e-12));
  // With the knee at M_eps the truncated flow climbs linearly to 8 + 64 tau, so the bound is larger.
  CHECK(std::isfinite(run.regular_bound));

  ControlConfig printed_knee;
  printed_knee.knee = 7.0 / 8.0;
  const auto low = controlled_explosion(ForcingLaw::power(2.0), 1.0, printed_knee);
  MESSAGE("regular bound " << low.regular_bound << " (knee 7/8), " << run.regular_bound << " (knee 8)");
  // Oracle (the Stieltjes sum is second order; 200 base cells leave about 3e-5 absolute):
  // 8 + (49/64) tau - int_0^tau B(s) w(s)^2 ds by adaptive quadrature (scipy, 1e-12).
  CHECK(low.regular_bound == doctest::Approx(11.20105455584655).epsilon(1e-5));
  CHECK(run.regular_bound == doctest::Approx(66.53113268084655).epsilon(1e-5));
  // The hoped-for constant 10 is exceeded with w(s) = 1/(1 - s); kept as a visible warning.
  WARN(low.regular_bound <= 10.0);

  ControlConfig fine;
  fine.neutral.base_intervals = 400;
  const auto refined = controlled_explosion(ForcingLaw::power(2.0), 1.0, fine);
  // Richardson-style comparison of the bounded part at shared nodes away from t*.
  double gap = 0.0;
  for (double s : {0.05, 0.1, 0.3, 0.6, 0.875}) {
    auto at = [s](const NeutralSolution& sol) {
      for (std::size_t j = 0; j < sol.t.size(); ++j)
        if (std::abs(sol.t[j] - s) < 1e-12) return sol.regular[j];
      return std::nan("");
    };
    gap = std::max(gap, std::abs(at(run.neutral) - at(refined.neutral)));
  }
  MESSAGE("regular part change under refinement " << gap);
  CHECK(gap < 1e-2);
}

TEST_CASE("square law: singular exponent, prefactor and blow-up time") {
  const auto& run = square_law_run();
  MESSAGE("gamma " << run.fit.gamma << " prefactor " << run.fit.prefactor << " T_est " << run.T_est
                   << " gamma_free " << run.fit.gamma_free);
  CHECK(run.fit.gamma == doctest::Approx(0.2).epsilon(0.1));
  CHECK(std::abs(run.fit.gamma - 0.2) <= 0.02);
  // Leading singular term a w(t*) |t - t*|^{-gamma}, with w(t*) = u0(eps) = 8/7.
  CHECK(std::abs(run.fit.prefactor / (8.0 / 7.0) - 1.0) <= 0.05);
  CHECK(std::abs(run.T_est - 1.0) <= 1e-5);
}

TEST_CASE("square law: coincidence before the window") {
  const auto& run = square_law_run();
  const double deviation = coincidence_check(run.trajectory, run.uncontrolled, 0.125);
  MESSAGE("coincidence deviation " << deviation);
  CHECK(deviation <= 1e-7);
  CHECK(coincidence_check(run.trajectory, run.uncontrolled, 1.0) == 0.0);
}

TEST_CASE("square law: reflection and periodic tiling") {
  const auto& run = square_law_run();
  const auto& path = run.trajectory;
  CHECK(path.period() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(path.begin() == 0.0);
  CHECK(path.end() == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(path.min_value() > 0.0);
  for (int k = 0; k <= 3; ++k) CHECK(path.value_at(2.0 * k) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(path.value_at(1.125) == doctest::Approx(8.0).epsilon(1e-10));
  CHECK(path.value_at(0.875) == doctest::Approx(8.0).epsilon(1e-10));

  // L1 of the reflected half equals L1 of the forward half.
  double forward = 0.0;
  double mirrored = 0.0;
  for (const auto& seg : path.segments()) {
    if (seg.end() <= 1.0 + 1e-12) forward += seg.l1_norm();
    if (seg.tag == SegmentTag::Reflected && seg.begin() < 2.0) mirrored += seg.l1_norm();
  }
  CHECK(std::isfinite(forward));
  CHECK(mirrored == doctest::Approx(forward).epsilon(1e-12));

  const auto per_period = path.l1_norm_per_period();
  REQUIRE(per_period.size() == 3);
  for (double norm : per_period) CHECK(norm == doctest::Approx(per_period.front()).epsilon(1e-12));
  CHECK(path.l1_norm() == doctest::Approx(3.0 * per_period.front()).epsilon(1e-12));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pick(0.0, 4.0);
  for (int i = 0; i < 20; ++i) {
    const double t = pick(rng);
    if (std::abs(std::fmod(t, 2.0) - 1.0) < 1e-6) continue;
    CHECK(path.value_at(t + 2.0) == doctest::Approx(path.value_at(t)).epsilon(1e-12));
  }

  int tags_periodic = 0;
  for (const auto& seg : path.segments()) tags_periodic += seg.tag == SegmentTag::Periodic;
  CHECK(tags_periodic == 6);
}

TEST_CASE("square law: L1 norm converges under refinement") {
  const auto& coarse = square_law_run();
  ControlConfig fine;
  fine.neutral.base_intervals = 400;
  fine.original_intervals = 400;
  const auto refined = controlled_explosion(ForcingLaw::power(2.0), 1.0, fine);
  const double ratio = refined.trajectory.l1_norm_per_period().front() / coarse.trajectory.l1_norm_per_period().front();
  MESSAGE("L1 refinement ratio " << ratio);
  CHECK(std::abs(ratio - 1.0) <= 0.01);
}

TEST_CASE("control schedule: quiet windows and sign field") {
  const auto& run = square_law_run();
  REQUIRE(run.schedule);
  const auto& schedule = *run.schedule;
  CHECK(schedule.active_window().first == doctest::Approx(0.875));
  CHECK(schedule.active_window().second == doctest::Approx(1.0));
  for (double t : {0.1, 0.5, 0.87}) {
    CHECK(schedule.pointwise(t) == 0.0);
    CHECK(schedule.antiderivative(t) == 0.0);
  }
  for (double t : {1.13, 1.5, 1.99}) CHECK(schedule.reflected_pointwise(t) == 0.0);
  for (double t : {1.01, 1.05, 1.1}) CHECK(schedule.reflected_pointwise(t) < 0.0);
  for (double t : {0.9, 0.95, 0.99}) CHECK(schedule.pointwise(t) > 0.0);
  // A' = alpha away from t*.
  const double t = 0.95;
  const double h = 1e-5;
  const double slope = (schedule.antiderivative(t + h) - schedule.antiderivative(t - h)) / (2 * h);
  CHECK(slope == doctest::Approx(schedule.pointwise(t)).epsilon(1e-6));
  CHECK(schedule.reflected_antiderivative(2.0) == 0.0);
  for (double s : {0.1, 0.5, 0.99}) CHECK(schedule.sign(s) == 1);
  for (double s : {1.01, 1.1}) CHECK(schedule.sign(s) == -1);
  CHECK(schedule.sign(2.5) == 1);
  CHECK(schedule.sign(3.05) == -1);
}

TEST_CASE("zero amplitude reproduces the truncated flow") {
  ControlConfig config;
  config.amplitude = 0.0;
  const auto run = controlled_explosion(ForcingLaw::power(2.0), 1.0, config);
  // Truncated at the knee 8, starting from 8: linear growth 8 + 64 t.
  double worst = 0.0;
  for (std::size_t j = 0; j < run.neutral.t.size(); ++j)
    worst = std::max(worst, std::abs(run.neutral.z[j] - (8.0 + 64.0 * run.neutral.t[j])));
  CHECK(worst <= 1e-10);
  CHECK(coincidence_check(run.trajectory, run.uncontrolled, 0.125) <= 1e-9);
}

TEST_CASE("uncontrolled tail has finite mass only for p > 2") {
  ControlConfig config;
  config.uncontrolled_tail = true;
  const auto cubic = controlled_explosion(ForcingLaw::power(3.0), 1.0, config);
  const auto norms = cubic.trajectory.l1_norm_per_period();
  REQUIRE(norms.size() == 1);
  CHECK(std::isfinite(norms.front()));
  // Each half period carries int_0^{1/2} (1 - 2t)^{-1/2} dt = 1.
  CHECK(norms.front() == doctest::Approx(2.0).epsilon(2e-3));

  const auto quadratic = controlled_explosion(ForcingLaw::power(2.0), 1.0, config);
  CHECK(std::isinf(quadratic.trajectory.l1_norm()));
}
