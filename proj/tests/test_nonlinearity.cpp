#include <doctest.h>

#include <cmath>
#include <numbers>

#include "blowup/errors.hpp"
#include "blowup/nonlinearity.hpp"

using namespace blowup;

namespace {

ForcingLaw custom_power_forcing(double p) {
  return ForcingLaw(CustomForcing{[p](double s) { return std::pow(s, p); }, {}, {}, {}});
}

AbsorptionLaw custom_power_absorption(double m) {
  return AbsorptionLaw(CustomAbsorption{[m](double s) { return std::pow(s, m); }, {},
                                        [m](double s) { return std::pow(s, m + 1.0) / (m + 1.0); }});
}

template <class F>
void check_code(F&& call, ErrorCode expected) {
  try {
    call();
    FAIL("expected a contract violation");
  } catch (const ContractError& e) {
    CHECK(e.code() == expected);
  }
}

}  // namespace

TEST_CASE("phi closed forms") {
  CHECK(phi(ForcingLaw::power(2.0), 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(phi(ForcingLaw::power(3.0), 2.0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(phi_inv(ForcingLaw::power(2.0), 0.25) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(phi_inv(ForcingLaw::power(3.0), 0.125) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("phi of a shifted cube by quadrature") {
  const ForcingLaw law(CustomForcing{[](double s) { return std::pow(1.0 + s, 3.0); }, {}, {}, {}});
  // int_0^inf (1+s)^-3 ds = 1/2
  CHECK(phi(law, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(phi_inv(law, 0.5) == doctest::Approx(0.0));
  CHECK(phi_inv(law, 0.125) == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("psi closed form and exponential oracle") {
  const auto cubic = AbsorptionLaw::power(3.0);
  CHECK(psi(cubic, 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(psi_inv(cubic, std::sqrt(2.0)) == doctest::Approx(1.0).epsilon(1e-14));
  // int ds / sqrt(e^s - 1) = 2 atan(sqrt(e^s - 1))
  const double oracle = std::sqrt(2.0) * (std::numbers::pi / 2.0 - std::atan(std::sqrt(std::numbers::e - 1.0)));
  const auto exp_law = AbsorptionLaw::exponential();
  CHECK(psi(exp_law, 1.0) == doctest::Approx(oracle).epsilon(1e-11));
  CHECK(psi_inv(exp_law, oracle) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("contract violations") {
  check_code([] { (void)phi(ForcingLaw::power(1.0), 1.0); }, ErrorCode::NotSuperlinear);
  check_code([] { (void)phi(ForcingLaw(CustomForcing{[](double s) { return 1.0 + s; }, {}, {}, {}}), 1.0); },
             ErrorCode::NotSuperlinear);
  check_code([] { (void)psi(AbsorptionLaw::power(1.0), 1.0); }, ErrorCode::KellerOssermanFails);
  check_code([] { (void)psi(truncate(AbsorptionLaw::power(3.0), 2.0).as_absorption(), 1.0); },
             ErrorCode::KellerOssermanFails);
  check_code([] { (void)phi_inv(ForcingLaw::exponential(), 2.0); }, ErrorCode::OutOfRange);
  check_code([] { (void)ForcingLaw::power(2.0, -1.0); }, ErrorCode::OutOfRange);
  check_code([] { (void)ForcingLaw(CustomForcing{[](double s) { return -s; }, {}, {}, {}}); }, ErrorCode::OutOfRange);
}

TEST_CASE("phi_inv inverts phi on a log grid") {
  for (double p : {1.5, 2.0, 3.0}) {
    const auto law = ForcingLaw::power(p);
    for (double r = 1e-3; r <= 1e6; r *= 10.0) {
      CHECK(phi_inv(law, phi(law, r)) == doctest::Approx(r).epsilon(1e-12));
    }
  }
  const auto exp_law = ForcingLaw::exponential();
  for (double r : {0.1, 1.0, 10.0}) CHECK(phi_inv(exp_law, phi(exp_law, r)) == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("quadrature agrees with closed forms") {
  for (double p : {1.5, 2.0, 3.0}) {
    const auto analytic = ForcingLaw::power(p);
    const auto numeric = custom_power_forcing(p);
    for (double r : {1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6}) {
      CHECK(phi(numeric, r) == doctest::Approx(phi(analytic, r)).epsilon(1e-10));
    }
    CHECK(phi_inv(numeric, 0.3) == doctest::Approx(phi_inv(analytic, 0.3)).epsilon(1e-10));
  }
  for (double m : {2.0, 3.0, 5.0}) {
    const auto analytic = AbsorptionLaw::power(m);
    const auto numeric = custom_power_absorption(m);
    for (double d : {1e-3, 1.0, 1e3}) {
      CHECK(psi(numeric, d) == doctest::Approx(psi(analytic, d)).epsilon(1e-10));
    }
    CHECK(psi_inv(numeric, 0.7) == doctest::Approx(psi_inv(analytic, 0.7)).epsilon(1e-10));
  }
}

TEST_CASE("derivatives of the inverse Keller-Osserman profile") {
  for (const auto& law : {AbsorptionLaw::power(3.0), AbsorptionLaw::exponential()}) {
    const double z = 0.4;
    double previous_error = 0.0;
    for (double h : {1e-2, 5e-3}) {
      const double u = psi_inv(law, z);
      const double first = (psi_inv(law, z + h) - psi_inv(law, z - h)) / (2.0 * h);
      const double second = (psi_inv(law, z + h) - 2.0 * u + psi_inv(law, z - h)) / (h * h);
      const double first_error = std::abs(first + std::sqrt(2.0 * law.primitive(u)));
      CHECK(first_error < 1e-3 * std::abs(first));
      CHECK(second == doctest::Approx(law.value(u)).epsilon(1e-3));
      if (previous_error > 0.0) {
        CHECK(std::log2(previous_error / first_error) > 1.8);  // second-order differences
      }
      previous_error = first_error;
    }
  }
}

TEST_CASE("domination regimes") {
  const auto cubic = AbsorptionLaw::power(3.0);
  const auto weak = domination_report(ForcingLaw::power(2.0), cubic);
  CHECK(weak.regime == DominationRegime::WeakDomination);
  CHECK(weak.L_at_infinity == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(weak.lambda_0 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(weak.lambda_0 * weak.L_zero == doctest::Approx(1.0));

  const auto strong = domination_report(ForcingLaw::power(3.0), cubic);
  CHECK(strong.regime == DominationRegime::StrongDomination);
  CHECK(std::isinf(strong.L_at_infinity));
  CHECK(strong.L_near_zero == 0.0);

  CHECK(domination_report(ForcingLaw::power(1.5), cubic).regime == DominationRegime::NoDomination);
  CHECK(domination_report(ForcingLaw::exponential(), AbsorptionLaw::s_exp_2s()).regime ==
        DominationRegime::NoDomination);

  for (double m : {3.0, 5.0, 7.0}) {
    const auto f = ForcingLaw::power((m + 1.0) / 2.0);
    const auto g = AbsorptionLaw::power(m);
    for (double tau = 1e-4; tau < 1e5; tau *= 7.0) {
      CHECK(domination_ratio(f, g, tau) == doctest::Approx(std::sqrt((m + 1.0) / 2.0)).epsilon(1e-13));
    }
    CHECK(restricted_threshold(f, g, 0.5) == doctest::Approx(std::sqrt(2.0 / (m + 1.0))).epsilon(1e-12));
  }
  CHECK(restricted_threshold(ForcingLaw::power(3.0), cubic, 2.0) ==
        doctest::Approx(1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("truncation") {
  const auto knee = truncate(ForcingLaw::power(2.0), 7.0 / 8.0);
  CHECK(knee.value(0.5) == doctest::Approx(0.25));
  CHECK(knee.value(2.0) == doctest::Approx(49.0 / 64.0));
  CHECK(knee.value(7.0 / 8.0) == knee.value(7.0 / 8.0 + 1e-14));
  CHECK(knee.derivative(2.0) == 0.0);
  CHECK(knee.lipschitz_bound() == doctest::Approx(7.0 / 4.0));

  const auto plateau = truncate(AbsorptionLaw::power(3.0), 10.0);
  CHECK(plateau.value(15.0) == doctest::Approx(1000.0));
  const auto frozen = plateau.as_absorption();
  CHECK(frozen.value(15.0) == doctest::Approx(1000.0));
  CHECK(frozen.primitive(12.0) == doctest::Approx(2500.0 + 2000.0));

  const auto base = ForcingLaw::exponential();
  const auto cut = truncate(base, 3.0);
  for (double u = 0.0; u < 10.0; u += 0.37) CHECK(cut.value(u) == base.value(std::min(u, 3.0)));
}

TEST_CASE("power inverse profile scaling inequality") {
  // Unshifted powers are the equality case of the scaling bound.
  const double p = 3.0;
  const auto law = ForcingLaw::power(p);
  for (double zeta = 1e-4; zeta <= 1e-2; zeta *= 10.0) {
    const double reference = phi_inv(law, zeta);
    for (double nu : {1.5, 2.0, 4.0}) {
      CHECK(nu * phi_inv(law, std::pow(nu, p - 1.0) * zeta) >= reference * (1.0 - 1e-12));
    }
    for (double nu : {0.25, 0.5}) {
      CHECK(nu * phi_inv(law, std::pow(nu, p - 1.0) * zeta) <= reference * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("Keller-Osserman ratio probe") {
  // Power laws give Psi(eta s)/Psi(s) = eta^{-(m-1)/2} exactly.
  CHECK(psi_ratio_probe(AbsorptionLaw::power(3.0), 2.0) == doctest::Approx(0.5).epsilon(1e-12));
}
