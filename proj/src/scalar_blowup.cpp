#include "blowup/scalar_blowup.hpp"

#include <cmath>
#include <optional>
#include <vector>

#include "blowup/fitting.hpp"

namespace blowup {

double BlowupSolution::operator()(double t) const {
  require(t >= 0.0 && t < T_inf, ErrorCode::OutOfRange, "t", "time outside [0, T_inf)");
  if (t == 0.0) return u0;
  return phi_inv(law, law.lambda() * (T_inf - t));
}

double blowup_time(const ForcingLaw& law, double u0) {
  require(u0 >= 0.0, ErrorCode::OutOfRange, "initial.u0", "initial value must be nonnegative");
  return phi(law, u0) / law.lambda();
}

BlowupSolution closed_trajectory(const ForcingLaw& law, double u0) { return {law, u0, blowup_time(law, u0)}; }

BlowupIntegration integrate_until_blowup(const ForcingLaw& law, double u0, const BlowupOptions& options) {
  require(u0 >= 0.0, ErrorCode::OutOfRange, "initial.u0", "initial value must be nonnegative");
  require(options.cap > u0, ErrorCode::OutOfRange, "numerics.cap", "cap must exceed the initial value");
  std::optional<double> predicted;
  try {
    predicted = blowup_time(law, u0);
  } catch (const ContractError& e) {
    if (e.code() != ErrorCode::NotSuperlinear) throw;
  }
  const double horizon = options.horizon > 0.0 ? options.horizon
                         : predicted          ? 10.0 * *predicted
                                              : options.fallback_horizon;

  DormandPrince<double> stepper([&law](double, double u) { return law.lambda() * law.value(u); }, 0.0, u0,
                                options.ode);
  TrajectorySegment segment;
  segment.tag = SegmentTag::Original;
  segment.t.push_back(0.0);
  segment.u.push_back(u0);
  std::vector<double> time_low{0.0};
  while (stepper.y() <= options.cap) {
    require(stepper.t() < horizon, ErrorCode::CapNotReached, "numerics.cap",
            "solution stayed below the cap up to the horizon");
    require(stepper.step(horizon), ErrorCode::CapNotReached, "numerics.cap", "step size underflow before the cap");
    segment.t.push_back(stepper.t());
    time_low.push_back(stepper.t_low());
    segment.u.push_back(stepper.y());
  }
  require(predicted.has_value(), ErrorCode::NotSuperlinear, "forcing", "cap reached but Phi does not exist");

  // Times near the singularity differ by less than ulp(t); fit against the compensated offset
  // from the first sample of the decade.
  std::vector<double> offsets;
  std::vector<double> potentials;
  std::size_t first = segment.t.size();
  for (std::size_t i = 0; i < segment.t.size(); ++i) {
    if (segment.u[i] < options.cap / 10.0) continue;
    if (first == segment.t.size()) first = i;
    offsets.push_back((segment.t[i] - segment.t[first]) + (time_low[i] - time_low[first]));
    potentials.push_back(phi(law, segment.u[i]));
  }
  require(offsets.size() >= 3, ErrorCode::InsufficientDecade, "numerics.cap",
          "fewer than three samples in the last decade of growth");
  const auto fit = fit_line(offsets, potentials);
  BlowupIntegration result;
  result.fitted_rate = -fit.slope;
  result.T_est = segment.t[first] + (time_low[first] - fit.intercept / fit.slope);
  result.fit_samples = static_cast<int>(offsets.size());
  result.samples.append(std::move(segment));
  return result;
}

}  // namespace blowup
