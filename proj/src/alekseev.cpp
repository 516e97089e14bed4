#include "blowup/alekseev.hpp"

#include <limits>

namespace blowup {

ScalarFlow::ScalarFlow(ForcingLaw law)
    : law_(std::move(law)),
      knee_(std::numeric_limits<double>::infinity()),
      closed_form_(!std::holds_alternative<CustomForcing>(law_.kind())) {}

ScalarFlow::ScalarFlow(const TruncatedLaw& law)
    : ScalarFlow([&law] {
        const auto* forcing = std::get_if<ForcingLaw>(&law.base());
        require(forcing != nullptr, ErrorCode::OutOfRange, "truncation.base", "scalar flow needs a forcing law");
        return *forcing;
      }()) {
  knee_ = law.level();
}

double ScalarFlow::rate(double u) const { return law_.lambda() * law_.value(std::min(u, knee_)); }

double ScalarFlow::rate_derivative(double u) const { return u > knee_ ? 0.0 : law_.lambda() * law_.derivative(u); }

double ScalarFlow::flow(double t, double s, double xi) const {
  const double duration = t - s;
  if (duration == 0.0) return xi;
  const double lambda = law_.lambda();
  if (closed_form_ && law_.value(xi) > 0.0) {
    const double plateau_rate = std::isfinite(knee_) ? rate(knee_) : 0.0;
    if (xi >= knee_) {
      const double candidate = xi + plateau_rate * duration;
      if (candidate >= knee_) return candidate;
      // Backward in time below the knee: the plateau lasts (knee - xi) / rate.
      const double remaining = duration - (knee_ - xi) / plateau_rate;
      return phi_inv(law_, phi(law_, knee_) - lambda * remaining);
    }
    const double potential = phi(law_, xi) - lambda * duration;
    const double knee_potential = std::isfinite(knee_) ? phi(law_, knee_) : 0.0;
    if (potential > knee_potential) return phi_inv(law_, potential);
    require(std::isfinite(knee_), ErrorCode::BlowupInsideInterval, "flow.t", "flow blows up before the target time");
    const double to_knee = (phi(law_, xi) - knee_potential) / lambda;
    return knee_ + plateau_rate * (duration - to_knee);
  }
  if (rate(xi) == 0.0) return xi;
  OdeOptions options{1e-12, 1e-14};
  DormandPrince<double> stepper([this](double, double u) { return rate(u); }, s, xi, options);
  stepper.advance_to(t);
  return stepper.y();
}

double ScalarFlow::sensitivity(double t, double s, double xi) const {
  if (t == s) return 1.0;
  const double start = rate(xi);
  if (start == 0.0) return std::exp(rate_derivative(xi) * (t - s));
  return rate(flow(t, s, xi)) / start;
}

}  // namespace blowup
