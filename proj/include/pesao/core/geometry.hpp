#pragma once

#include <array>
#include <cmath>

namespace pesao {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  [[nodiscard]] constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  [[nodiscard]] constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
  [[nodiscard]] Vec3 normalized() const { return *this / norm(); }
  [[nodiscard]] bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
  [[nodiscard]] std::array<double, 3> to_array() const { return {x, y, z}; }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Angle between two non-zero vectors, in radians. Uses atan2 so it stays
/// accurate for nearly parallel vectors where acos loses precision.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Scalar-first, right-handed unit quaternion. Vectors rotate as q v q*.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static constexpr Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
  /// Rotation of `angle_rad` about `axis` (need not be unit length).
  static Quaternion from_axis_angle(const Vec3& axis, double angle_rad);

  constexpr bool operator==(const Quaternion&) const = default;

  [[nodiscard]] constexpr Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
  }
  [[nodiscard]] constexpr Quaternion operator-() const { return {-w, -x, -y, -z}; }
  [[nodiscard]] constexpr Quaternion conjugate() const { return {w, -x, -y, -z}; }
  [[nodiscard]] constexpr double dot(const Quaternion& o) const {
    return w * o.w + x * o.x + y * o.y + z * o.z;
  }
  [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
  [[nodiscard]] Quaternion normalized() const;
  [[nodiscard]] bool finite() const {
    return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
  [[nodiscard]] std::array<double, 4> to_array() const { return {w, x, y, z}; }
};

/// Rotates v by unit quaternion q (q v q*).
Vec3 quat_rotate(const Quaternion& q, const Vec3& v);

/// Shortest-arc spherical interpolation; u = 0 returns q0 unchanged.
Quaternion slerp(const Quaternion& q0, const Quaternion& q1, double u);

/// Rotation angle (radians, in [0, pi]) taking a to b.
double rotation_angle(const Quaternion& a, const Quaternion& b);

/// True when a and b describe the same rotation within `tol` radians.
bool same_rotation(const Quaternion& a, const Quaternion& b, double tol = 1e-9);

}  // namespace pesao
