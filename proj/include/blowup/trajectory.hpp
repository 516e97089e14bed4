#pragma once

#include <string_view>
#include <vector>

namespace blowup {

enum class SegmentTag { Original, SingularGrowth, Reflected, Periodic };

[[nodiscard]] std::string_view to_string(SegmentTag tag) noexcept;

/// Time samples of one smooth piece. A singular endpoint carries the sample value +inf.
struct TrajectorySegment {
  SegmentTag tag = SegmentTag::Original;
  std::vector<double> t;
  std::vector<double> u;
  bool singular_begin = false;
  bool singular_end = false;
  /// Integral of u over the unsampled sliver next to a singular endpoint (analytic estimate).
  double singular_mass = 0.0;

  [[nodiscard]] double begin() const { return t.front(); }
  [[nodiscard]] double end() const { return t.back(); }
  /// Trapezoidal integral over finite samples plus the singular sliver.
  [[nodiscard]] double l1_norm() const;
};

/// Scalar trajectory assembled from abutting segments, optionally periodic.
class PiecewiseTrajectory {
 public:
  /// Appends a segment; throws TemplateMismatch if it does not start where the last one ended.
  void append(TrajectorySegment segment);

  [[nodiscard]] const std::vector<TrajectorySegment>& segments() const noexcept { return segments_; }
  [[nodiscard]] bool empty() const noexcept { return segments_.empty(); }
  [[nodiscard]] double begin() const { return segments_.front().begin(); }
  [[nodiscard]] double end() const { return segments_.back().end(); }
  [[nodiscard]] double period() const noexcept { return period_; }
  void set_period(double period) noexcept { period_ = period; }

  /// L1 norm over [begin, end].
  [[nodiscard]] double l1_norm() const;
  /// L1 norm of each full period (empty when not periodic).
  [[nodiscard]] std::vector<double> l1_norm_per_period() const;
  /// Piecewise-linear interpolation; +inf at singular endpoints.
  [[nodiscard]] double value_at(double t) const;
  [[nodiscard]] double min_value() const;

 private:
  std::vector<TrajectorySegment> segments_;
  double period_ = 0.0;
};

}  // namespace blowup
