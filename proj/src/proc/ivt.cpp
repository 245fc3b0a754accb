#include "pesao/proc/ivt.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace pesao::proc {

namespace {
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
// Durations come from differences of absolute times, so a run sitting exactly
// on a limit can land either side of it depending on the time origin.
// Comparisons allow this much slack to keep the result shift invariant.
constexpr double kDurationSlackMs = 1e-6;
}

double median_interval(std::span<const double> t) {
  if (t.size() < 2) return 0.0;
  std::vector<double> d(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) d[i - 1] = t[i] - t[i - 1];
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(d.begin(), mid);
  return (lower + upper) / 2.0;
}

std::vector<Segment> segments_from_labels(std::span<const double> t, std::span<const Label> labels) {
  if (t.size() != labels.size()) throw std::invalid_argument("times and labels differ in length");
  const double md = median_interval(t);
  const auto joined = [&](std::size_t i) { return t[i + 1] - t[i] <= kGapFactor * md; };
  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < t.size()) {
    if (labels[i] == Label::unclassified) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < t.size() && labels[j + 1] == labels[i] && joined(j)) ++j;
    Segment s;
    s.label = labels[i];
    s.first = i;
    s.last = j;
    s.t_start = t[i];
    s.t_end = (j + 1 < t.size() && joined(j)) ? t[j + 1] : t[j] + md;
    out.push_back(s);
    i = j + 1;
  }
  return out;
}

IvtResult classify_ivt(std::span<const double> t, std::span<const std::optional<Vec3>> dirs,
                       const IvtParams& params) {
  if (t.size() != dirs.size()) throw std::invalid_argument("times and directions differ in length");
  if (t.size() < 2) throw std::invalid_argument("I-VT needs at least two samples");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw std::invalid_argument("I-VT needs strictly increasing times");
  }
  const std::size_t n = t.size();
  const double md = median_interval(t);
  const auto neighbours = [&](std::size_t i) {
    return dirs[i] && dirs[i + 1] && t[i + 1] - t[i] <= kGapFactor * md;
  };
  const auto velocity = [&](std::size_t i) {
    return angle_between(*dirs[i], *dirs[i + 1]) * kRadToDeg / (t[i + 1] - t[i]);
  };

  IvtResult r;
  r.labels.assign(n, Label::unclassified);
  for (std::size_t i = 0; i < n; ++i) {
    if (!dirs[i]) continue;
    double v = 0.0;
    if (i + 1 < n && neighbours(i)) {
      v = velocity(i);
    } else if (i > 0 && neighbours(i - 1)) {
      v = velocity(i - 1);
    } else {
      continue;  // isolated sample
    }
    r.labels[i] = v < params.threshold_deg_s ? Label::fixation : Label::saccade;
  }

  const auto centroid = [&](std::size_t a, std::size_t b) {
    Vec3 c;
    for (std::size_t i = a; i <= b; ++i) c += *dirs[i];
    return c.normalized();
  };
  const auto continuous = [&](std::size_t a, std::size_t b) {
    for (std::size_t i = a; i < b; ++i) {
      if (!neighbours(i)) return false;
    }
    return true;
  };

  // merge pass over fixation segments, growing the current one in place
  auto segs = segments_from_labels(t, r.labels);
  std::optional<Segment> cur;
  for (const auto& s : segs) {
    if (s.label != Label::fixation) continue;
    if (cur && continuous(cur->last, s.first) && (s.t_start - cur->t_end) * 1e3 < params.merge_gap_ms - kDurationSlackMs &&
        angle_between(centroid(cur->first, cur->last), centroid(s.first, s.last)) * kRadToDeg <
            params.merge_angle_deg) {
      for (std::size_t i = cur->last + 1; i < s.first; ++i) r.labels[i] = Label::fixation;
      cur->last = s.last;
      cur->t_end = s.t_end;
    } else {
      cur = s;
    }
  }

  for (const auto& s : segments_from_labels(t, r.labels)) {
    if (s.label == Label::fixation && s.duration_ms() < params.min_fixation_ms - kDurationSlackMs) {
      for (std::size_t i = s.first; i <= s.last; ++i) r.labels[i] = Label::unclassified;
    }
  }
  r.segments = segments_from_labels(t, r.labels);
  return r;
}

}  // namespace pesao::proc
