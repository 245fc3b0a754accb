#include "pesao/core/pose.hpp"

#include <string>

#include "pesao/core/time.hpp"

namespace pesao {

Pose pose_interpolate(const Pose& p0, const Pose& p1, double t) {
  const double span = p1.t - p0.t;
  if (!(span >= kMinInterpolationInterval)) {
    throw DegenerateInterval("pose_interpolate: bracket width " + std::to_string(span) +
                             " s is below 1e-9 s");
  }
  if (t == p0.t) return p0;
  if (t == p1.t) return p1;

  const double u = (t - p0.t) / span;
  Pose out;
  // (1-u) a + u b keeps both endpoints bit-exact
  out.position = p0.position * (1.0 - u) + p1.position * u;
  out.orientation = slerp(p0.orientation, p1.orientation, u);
  out.t = t;
  out.domain = p0.domain;
  return out;
}

bool ClockMap::valid() const {
  return std::isfinite(offset) && std::isfinite(rate) && rate > 0.9 && rate < 1.1;
}

}  // namespace pesao
