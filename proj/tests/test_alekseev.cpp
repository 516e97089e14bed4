#include <doctest.h>

#include <cmath>
#include <numbers>

#include "blowup/alekseev.hpp"

using namespace blowup;

namespace {

VectorField<1> square_field() {
  return {[](const Vector<1>& y) { return Vector<1>(y[0] * y[0]); },
          [](const Vector<1>& y) { return Matrix<1>::Constant(2.0 * y[0]); }};
}

VectorField<2> rotation_field() {
  Matrix<2> A;
  A << 0.0, 1.0, -1.0, 0.0;
  return {[A](const Vector<2>& y) { return Vector<2>(A * y); }, [A](const Vector<2>&) { return A; }};
}

/// Classical RK4 with fixed steps, an independent reference integrator for scalar fields.
double rk4(const std::function<double(double)>& f, double y, double duration, int steps) {
  const double h = duration / steps;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(y);
    const double k2 = f(y + 0.5 * h * k1);
    const double k3 = f(y + 0.5 * h * k2);
    const double k4 = f(y + h * k3);
    y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  }
  return y;
}

double richardson_rk4(const std::function<double(double)>& f, double y, double duration) {
  const double coarse = rk4(f, y, duration, 2000);
  const double fine = rk4(f, y, duration, 4000);
  return fine + (fine - coarse) / 15.0;
}

}  // namespace

TEST_CASE("flow examples") {
  CHECK(flow<1>(square_field(), 0.5, 0.0, Vector<1>(1.0))[0] == doctest::Approx(2.0).epsilon(1e-10));
  const VectorField<3> zero{[](const Vector<3>&) { return Vector<3>::Zero(); }, {}};
  const Vector<3> xi(1.0, -2.0, 0.5);
  CHECK(flow<3>(zero, 3.0, 1.0, xi) == xi);
  CHECK(flow<3>(zero, 1.0, 1.0, xi) == xi);

  const VectorField<1> sine{[](const Vector<1>& y) { return Vector<1>(std::sin(y[0])); }, {}};
  const double reference = richardson_rk4([](double y) { return std::sin(y); }, 0.3, 1.0);
  // du / sin u = dt integrates to u = 2 atan(tan(u0 / 2) e^t).
  CHECK(reference == doctest::Approx(2.0 * std::atan(std::tan(0.15) * std::exp(1.0))).epsilon(1e-12));
  CHECK(std::abs(flow<1>(sine, 1.0, 0.0, Vector<1>(0.3))[0] - reference) < 1e-9);
}

TEST_CASE("flow reports blow-up inside the interval") {
  try {
    (void)flow<1>(square_field(), 1.5, 0.0, Vector<1>(1.0));
    FAIL("expected BlowupInsideInterval");
  } catch (const ContractError& e) {
    CHECK(e.code() == ErrorCode::BlowupInsideInterval);
  }
}

TEST_CASE("sensitivity examples") {
  CHECK(sensitivity<1>(square_field(), 0.5, 0.0, Vector<1>(1.0))(0, 0) == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(sensitivity<2>(rotation_field(), 0.7, 0.7, Vector<2>(1.0, 2.0)) == Matrix<2>::Identity());
  const Matrix<2> rotated = sensitivity<2>(rotation_field(), std::numbers::pi / 2.0, 0.0, Vector<2>(1.0, 0.0));
  Matrix<2> expected;
  expected << 0.0, 1.0, -1.0, 0.0;
  CHECK((rotated - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("semigroup property on random triples") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> time(0.0, 2.0);
  const VectorField<2> pendulum{[](const Vector<2>& y) { return Vector<2>(y[1], -std::sin(y[0])); }, {}};
  for (int trial = 0; trial < 20; ++trial) {
    const double t0 = time(rng);
    const double s = time(rng);
    const double t = time(rng);
    const Vector<2> xi(time(rng), time(rng) - 1.0);
    const Vector<2> direct = flow<2>(pendulum, t, t0, xi);
    const Vector<2> composed = flow<2>(pendulum, t, s, flow<2>(pendulum, s, t0, xi));
    CHECK((direct - composed).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("sensitivity matches finite differences and the Gronwall bound") {
  const VectorField<2> field{[](const Vector<2>& y) { return Vector<2>(y[1], -std::sin(y[0]) - 0.2 * y[1]); }, {}};
  const VectorField<3> lorenz{[](const Vector<3>& y) {
                                return Vector<3>(10.0 * (y[1] - y[0]), y[0] * (28.0 - y[2]) - y[1],
                                                 y[0] * y[1] - 8.0 / 3.0 * y[2]);
                              },
                              {}};
  auto check = [](const auto& f, const auto& xi, double t) {
    constexpr int D = std::decay_t<decltype(xi)>::RowsAtCompileTime;
    const auto S = sensitivity<D>(f, t, 0.0, xi);
    double worst = 0.0;
    for (int k = 0; k < D; ++k) {
      const double delta = 1e-6 * (1.0 + std::abs(xi[k]));
      auto plus = xi;
      auto minus = xi;
      plus[k] += delta;
      minus[k] -= delta;
      const auto column = ((flow<D>(f, t, 0.0, plus) - flow<D>(f, t, 0.0, minus)) / (2.0 * delta)).eval();
      worst = std::max(worst, (column - S.col(k)).cwiseAbs().maxCoeff() / (1.0 + S.col(k).cwiseAbs().maxCoeff()));
    }
    CHECK(worst <= 1e-5);
    // Gronwall: the induced infinity norm stays below exp(M t) with M the sampled Jacobian bound.
    double bound = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const auto y = flow<D>(f, t * i / 200.0, 0.0, xi);
      bound = std::max(bound, f.jacobian_at(y).cwiseAbs().rowwise().sum().maxCoeff());
    }
    CHECK(S.cwiseAbs().rowwise().sum().maxCoeff() <= std::exp(bound * t) * (1.0 + 1e-9));
  };
  check(field, Vector<2>(0.5, 0.1), 3.0);
  check(lorenz, Vector<3>(1.0, 1.0, 1.0), 0.5);
  check(square_field(), Vector<1>(0.8), 0.6);
}

TEST_CASE("perturbed problems") {
  const auto field = square_field();
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.05 * i);
  const Perturbation<1> none = [](double, const Vector<1>&) { return Vector<1>::Zero().eval(); };
  const auto free_run = solve_perturbed<1>(field, none, Vector<1>(1.0), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(free_run.y[i][0] == doctest::Approx(1.0 / (1.0 - grid[i])).epsilon(1e-10));
  }

  // Truncated square with linear damping against a Richardson RK4 oracle.
  const VectorField<1> capped{[](const Vector<1>& y) { return Vector<1>(std::pow(std::min(y[0], 10.0), 2.0)); }, {}};
  const Perturbation<1> damping = [](double, const Vector<1>& y) { return y; };
  std::vector<double> unit_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto damped = solve_perturbed<1>(capped, damping, Vector<1>(1.0), unit_grid);
  const double reference = richardson_rk4([](double y) { return std::pow(std::min(y, 10.0), 2.0) - y; }, 1.0, 1.0);
  CHECK(std::abs(damped.y.back()[0] - reference) < 1e-8 * reference);

  try {
    const Perturbation<1> decreasing = [](double, const Vector<1>& y) { return (-y).eval(); };
    (void)solve_perturbed<1>(capped, decreasing, Vector<1>(1.0), unit_grid);
    FAIL("expected NonMonotonePerturbation");
  } catch (const ContractError& e) {
    CHECK(e.code() == ErrorCode::NonMonotonePerturbation);
  }
}

TEST_CASE("stiff perturbation falls back to implicit midpoint") {
  const VectorField<1> capped{[](const Vector<1>& y) { return Vector<1>(std::pow(std::min(y[0], 10.0), 2.0)); }, {}};
  const Perturbation<1> relax = [](double t, const Vector<1>& y) { return Vector<1>(1e8 * (y[0] - std::sin(t))); };
  PerturbedOptions options;
  options.explicit_step_budget = 20'000;
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const auto run = solve_perturbed<1>(capped, relax, Vector<1>(0.0), grid, options);
  CHECK(run.used_implicit);
  // The fast relaxation pins y to sin t; midpoint is not L-stable, so the stiff mode leaves an
  // O(h^2 |y''|) trace rather than O(1e-8).
  CHECK(run.y.back()[0] == doctest::Approx(std::sin(1.0)).epsilon(1e-4));
}

TEST_CASE("representation residuals") {
  const Perturbation<1> none = [](double, const Vector<1>&) { return Vector<1>::Zero().eval(); };
  CHECK(verify_representation<1>(square_field(), none, 0.0, Vector<1>(1.0), 0.5).max_residual < 1e-12);

  const Perturbation<1> sine_forcing = [](double t, const Vector<1>&) { return Vector<1>(-std::sin(t)); };
  const auto forced = verify_representation<1>(square_field(), sine_forcing, 0.0, Vector<1>(1.0), 0.5);
  CHECK(forced.max_residual <= 1e-6);
  CHECK(forced.coarse_max_residual <= 1e-6);

  const double eps = 0.3;
  const Perturbation<2> linear = [eps](double, const Vector<2>& y) { return (eps * y).eval(); };
  const auto duhamel = verify_representation<2>(rotation_field(), linear, 0.0, Vector<2>(1.0, -0.5), 2.0);
  CHECK(duhamel.max_residual <= 1e-8);
}

TEST_CASE("scalar closed-form flow with a knee") {
  const auto law = ForcingLaw::power(2.0);
  const ScalarFlow untruncated(law);
  CHECK(untruncated.flow(0.5, 0.0, 1.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(untruncated.sensitivity(0.5, 0.0, 1.0) == doctest::Approx(4.0).epsilon(1e-14));
  const ScalarFlow knee(truncate(law, 2.0));
  // Reaches the knee at t = 1/2, then grows linearly with slope 4.
  CHECK(knee.flow(0.75, 0.0, 1.0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(knee.flow(0.0, 0.75, 3.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(knee.sensitivity(0.75, 0.0, 1.0) == doctest::Approx(4.0).epsilon(1e-14));
  const VectorField<1> numeric{[](const Vector<1>& y) { return Vector<1>(std::pow(std::min(y[0], 2.0), 2.0)); }, {}};
  for (double xi : {0.3, 1.0, 1.9, 2.5}) {
    for (double t : {-0.4, 0.2, 0.9}) {
      if (xi < 1.0 && t < 0.0) continue;
      CHECK(knee.flow(t, 0.0, xi) == doctest::Approx(flow<1>(numeric, t, 0.0, Vector<1>(xi))[0]).epsilon(1e-9));
      CHECK(knee.sensitivity(t, 0.0, xi) ==
            doctest::Approx(sensitivity<1>(numeric, t, 0.0, Vector<1>(xi))(0, 0)).epsilon(1e-6));
    }
  }
}
