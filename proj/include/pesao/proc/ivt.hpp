#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pesao/core/geometry.hpp"
#include "pesao/proc/inputs.hpp"

namespace pesao::proc {

struct IvtParams {
  double threshold_deg_s = 30.0;
  double min_fixation_ms = 60.0;
  double merge_gap_ms = 75.0;
  double merge_angle_deg = 0.5;
};

/// Consecutive samples further apart than this many median intervals are
/// not neighbours: no velocity is taken across them and label runs break.
inline constexpr double kGapFactor = 2.5;

struct Segment {
  Label label = Label::unclassified;
  std::size_t first = 0;  // record indices, inclusive
  std::size_t last = 0;
  double t_start = 0.0;
  /// Start of the following record, or last sample + median interval when a
  /// gap or the end of data follows.
  double t_end = 0.0;
  [[nodiscard]] double duration_ms() const { return (t_end - t_start) * 1e3; }
};

/// Median of consecutive differences; 0 with fewer than two samples.
double median_interval(std::span<const double> t);

/// Fixation and saccade runs of `labels`, broken at gaps. Shared by the
/// processor and the evaluator so both see the same segments.
std::vector<Segment> segments_from_labels(std::span<const double> t, std::span<const Label> labels);

struct IvtResult {
  std::vector<Label> labels;
  std::vector<Segment> segments;
};

/// Velocity-threshold classification. Sample i gets the forward velocity
/// angle(d_i, d_i+1) / dt, or the backward one when its successor is missing
/// or across a gap. Nearby fixations (gap < merge_gap_ms, centroids within
/// merge_angle_deg, no missing data between) merge first; fixations shorter
/// than min_fixation_ms then become Unclassified. Records without a
/// direction are Unclassified. Needs strictly increasing times.
IvtResult classify_ivt(std::span<const double> t, std::span<const std::optional<Vec3>> dirs,
                       const IvtParams& params = {});

}  // namespace pesao::proc
