#include <doctest.h>

#include <cmath>

#include "blowup/errors.hpp"
#include "blowup/scalar_blowup.hpp"

using namespace blowup;

namespace {
ForcingLaw shifted_cube() {
  return ForcingLaw(CustomForcing{[](double s) { return std::pow(1.0 + s, 3.0); }, {}, {}, {}});
}
}  // namespace

TEST_CASE("blow-up times") {
  CHECK(blowup_time(ForcingLaw::power(2.0), 1.0) == doctest::Approx(1.0));
  CHECK(blowup_time(ForcingLaw::power(3.0, 2.0), 1.0) == doctest::Approx(0.25));
  CHECK(blowup_time(shifted_cube(), 0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("closed trajectories") {
  const auto quad = closed_trajectory(ForcingLaw::power(2.0), 1.0);
  CHECK(quad(0.0) == 1.0);
  CHECK(quad(0.5) == doctest::Approx(2.0).epsilon(1e-14));
  const auto cubic = closed_trajectory(ForcingLaw::power(3.0), 1.0);
  CHECK(cubic(0.375) == doctest::Approx(1.0 / std::sqrt(1.0 - 2.0 * 0.375)).epsilon(1e-14));
  CHECK(cubic(0.375) == doctest::Approx(2.0).epsilon(1e-14));
  // Phi(u(t)) + lambda t is conserved.
  for (double t = 0.0; t < cubic.T_inf; t += cubic.T_inf / 37.0) {
    CHECK(phi(cubic.law, cubic(t)) + t == doctest::Approx(cubic.T_inf).epsilon(1e-12));
  }
}

TEST_CASE("numeric blow-up extrapolation") {
  const auto quad = integrate_until_blowup(ForcingLaw::power(2.0), 1.0);
  CHECK(std::abs(quad.T_est - 1.0) <= 1e-6);
  CHECK(quad.fitted_rate == doctest::Approx(1.0).epsilon(1e-6));
  const auto custom = integrate_until_blowup(shifted_cube(), 0.0);
  CHECK(std::abs(custom.T_est - 0.5) <= 1e-6);
  try {
    (void)integrate_until_blowup(ForcingLaw::power(1.0), 1.0);
    FAIL("expected CapNotReached");
  } catch (const ContractError& e) {
    CHECK(e.code() == ErrorCode::CapNotReached);
  }
}

TEST_CASE("numeric trajectory matches the closed form below 1e6") {
  for (double p : {1.5, 2.0}) {
    const auto law = ForcingLaw::power(p, 1.5);
    const auto exact = closed_trajectory(law, 0.7);
    const auto run = integrate_until_blowup(law, 0.7);
    const auto& seg = run.samples.segments().front();
    double worst = 0.0;
    for (std::size_t i = 0; i < seg.t.size(); ++i) {
      if (seg.u[i] > 1e6) break;
      worst = std::max(worst, std::abs(seg.u[i] / exact(seg.t[i]) - 1.0));
    }
    CHECK(worst < 1e-7);
  }
}

TEST_CASE("cubic growth tracks the conserved potential") {
  // For p = 3 the time to blow-up at u = 1e6 is below 1e-12, so a pointwise comparison in t is
  // limited by the rounding of T itself; compare the time-like invariant Phi(u)/lambda + t instead.
  const auto law = ForcingLaw::power(3.0, 1.5);
  const double T = blowup_time(law, 0.7);
  const auto run = integrate_until_blowup(law, 0.7);
  const auto& seg = run.samples.segments().front();
  for (std::size_t i = 0; i < seg.t.size(); ++i) {
    if (seg.u[i] > 1e6) break;
    CHECK(std::abs(phi(law, seg.u[i]) / law.lambda() + seg.t[i] - T) < 1e-10 * T);
  }
  CHECK(std::abs(run.T_est - T) <= 1e-6 * T);
}

TEST_CASE("blow-up time decreases in u0 and lambda") {
  for (double p : {1.5, 3.0}) {
    double previous = INFINITY;
    for (double u0 = 0.1; u0 < 10.0; u0 *= 1.7) {
      const double t = blowup_time(ForcingLaw::power(p), u0);
      CHECK(t < previous);
      previous = t;
    }
    previous = INFINITY;
    for (double lambda = 0.1; lambda < 10.0; lambda *= 1.7) {
      const double t = blowup_time(ForcingLaw::power(p, lambda), 1.0);
      CHECK(t < previous);
      previous = t;
    }
  }
}
