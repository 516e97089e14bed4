#include "blowup/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blowup/errors.hpp"

namespace blowup {

std::string_view to_string(SegmentTag tag) noexcept {
  switch (tag) {
    case SegmentTag::Original: return "original";
    case SegmentTag::SingularGrowth: return "singular_growth";
    case SegmentTag::Reflected: return "reflected";
    case SegmentTag::Periodic: return "periodic";
  }
  return "unknown";
}

double TrajectorySegment::l1_norm() const {
  double sum = singular_mass;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(u[i - 1])) continue;
    sum += 0.5 * (t[i] - t[i - 1]) * (std::abs(u[i]) + std::abs(u[i - 1]));
  }
  return sum;
}

void PiecewiseTrajectory::append(TrajectorySegment segment) {
  require(!segment.t.empty() && segment.t.size() == segment.u.size(), ErrorCode::TemplateMismatch, "segment",
          "segment needs matching, non-empty samples");
  if (!segments_.empty()) {
    const double gap = std::abs(segment.begin() - end());
    require(gap <= 1e-12 * std::max(1.0, std::abs(end())), ErrorCode::TemplateMismatch, "segment",
            "segments must abut");
  }
  segments_.push_back(std::move(segment));
}

double PiecewiseTrajectory::l1_norm() const {
  double sum = 0.0;
  for (const auto& s : segments_) sum += s.l1_norm();
  return sum;
}

std::vector<double> PiecewiseTrajectory::l1_norm_per_period() const {
  std::vector<double> norms;
  if (period_ <= 0.0 || segments_.empty()) return norms;
  const double origin = begin();
  for (const auto& s : segments_) {
    const double mid = 0.5 * (s.begin() + s.end()) - origin;
    const auto index = static_cast<std::size_t>(std::floor(mid / period_));
    if (norms.size() <= index) norms.resize(index + 1, 0.0);
    norms[index] += s.l1_norm();
  }
  const double complete = std::floor((end() - origin) / period_ + 1e-9);
  norms.resize(static_cast<std::size_t>(complete));
  return norms;
}

double PiecewiseTrajectory::value_at(double t) const {
  for (const auto& s : segments_) {
    if (t < s.begin() || t > s.end()) continue;
    const auto it = std::lower_bound(s.t.begin(), s.t.end(), t);
    const auto i = static_cast<std::size_t>(it - s.t.begin());
    if (i < s.t.size() && s.t[i] == t) return s.u[i];
    if (i == 0) return s.u.front();
    const double w = (t - s.t[i - 1]) / (s.t[i] - s.t[i - 1]);
    if (!std::isfinite(s.u[i]) || !std::isfinite(s.u[i - 1])) return std::numeric_limits<double>::infinity();
    return (1.0 - w) * s.u[i - 1] + w * s.u[i];
  }
  require(false, ErrorCode::OutOfRange, "t", "time outside the trajectory");
  return 0.0;
}

double PiecewiseTrajectory::min_value() const {
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& s : segments_) {
    for (double v : s.u) lowest = std::min(lowest, v);
  }
  return lowest;
}

}  // namespace blowup
