#pragma once

#include <stdexcept>

#include "pesao/core/geometry.hpp"

namespace pesao {

enum class TimeDomain { device, world };

/// 6-DOF rigid-body state stamped on either a device or the world clock.
struct Pose {
  Vec3 position;
  Quaternion orientation;
  double t = 0.0;
  TimeDomain domain = TimeDomain::device;

  /// Maps a point from the body frame into the parent frame.
  [[nodiscard]] Vec3 transform_point(const Vec3& p) const {
    return position + quat_rotate(orientation, p);
  }
};

class DegenerateInterval : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Minimum bracket width accepted by pose_interpolate, seconds.
inline constexpr double kMinInterpolationInterval = 1e-9;

/// Position lerp plus orientation slerp at parameter (t - p0.t) / (p1.t - p0.t).
/// Throws DegenerateInterval if the bracket is narrower than 1 ns.
Pose pose_interpolate(const Pose& p0, const Pose& p1, double t);

}  // namespace pesao
