#include "pesao/core/geometry.hpp"


namespace pesao {

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle_rad) {
  const Vec3 a = axis.normalized();
  const double s = std::sin(angle_rad / 2.0);
  return {std::cos(angle_rad / 2.0), a.x * s, a.y * s, a.z * s};
}

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Vec3 quat_rotate(const Quaternion& q, const Vec3& v) {
  // v' = v + 2 u x (u x v + w v), u = vector part
  const Vec3 u{q.x, q.y, q.z};
  const Vec3 t = u.cross(v) * 2.0;
  return v + t * q.w + u.cross(t);
}

Quaternion slerp(const Quaternion& q0, const Quaternion& q1, double u) {
  if (u == 0.0) return q0;
  const Quaternion end = q0.dot(q1) < 0.0 ? -q1 : q1;
  if (u == 1.0) return end;

  // Scale the relative rotation's angle. atan2 keeps small angles accurate
  // where acos of the dot product would not.
  const Quaternion rel = q0.conjugate() * end;
  const double vn = std::sqrt(rel.x * rel.x + rel.y * rel.y + rel.z * rel.z);
  if (vn == 0.0) return q0;
  const double half = std::atan2(vn, rel.w) * u;
  const double s = std::sin(half) / vn;
  return (q0 * Quaternion{std::cos(half), rel.x * s, rel.y * s, rel.z * s}).normalized();
}

double rotation_angle(const Quaternion& a, const Quaternion& b) {
  const Quaternion rel = a.conjugate() * b;
  const double vec = std::sqrt(rel.x * rel.x + rel.y * rel.y + rel.z * rel.z);
  return 2.0 * std::atan2(vec, std::abs(rel.w));
}

bool same_rotation(const Quaternion& a, const Quaternion& b, double tol) {
  return rotation_angle(a, b) <= tol;
}

}  // namespace pesao
