#include "bodykin/rotation.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "bodykin/errors.hpp"

namespace bodykin {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kTinyAngle = 1e-8;

Vec3 flip_if_needed(const Vec3& axis) {
  // Resolve the sign ambiguity at angle pi: first nonzero component positive.
  for (int k = 0; k < 3; ++k) {
    if (axis[k] != 0.0) return axis[k] > 0.0 ? axis : Vec3(-axis);
  }
  return axis;
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 axis_angle_to_matrix(const Vec3& axis_angle) {
  const double theta2 = axis_angle.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // R = I + a*[v]x + b*[v]x^2 with v the *unnormalized* vector
  if (theta < kTinyAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = skew(axis_angle);
  return Mat3::Identity() + a * k + b * (k * k);
}

Vec3 matrix_to_axis_angle(const Mat3& rotation) {
  const Mat3 should_be_identity = rotation.transpose() * rotation;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(rotation.determinant() - 1.0) > 1e-6) {
    throw ParamError("matrix_to_axis_angle: input is not a rotation matrix");
  }
  // Go through a quaternion: stable for every angle including near pi, where
  // the direct trace formula loses the axis.
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();  // keep angle in [0, pi]
  const double sin_half = q.vec().norm();
  const double angle = 2.0 * std::atan2(sin_half, q.w());
  if (angle < kTinyAngle || sin_half == 0.0) {
    // Small-angle: q.vec() ~ axis * angle/2 to second order.
    return 2.0 * q.vec();
  }
  Vec3 axis = q.vec() / sin_half;
  if (angle > kPi - 1e-9) axis = flip_if_needed(axis);
  return angle * axis;
}

Vec3 canonical_axis_angle(const Vec3& axis_angle) {
  double theta = axis_angle.norm();
  if (theta < kTinyAngle) return axis_angle;
  Vec3 axis = axis_angle / theta;
  if (theta > kPi) {  // (axis, theta) == (-axis, 2*pi - theta)
    theta = 2.0 * kPi - theta;
    axis = -axis;
    if (theta < kTinyAngle) return Vec3::Zero();
  }
  if (theta > kPi - 1e-9) axis = flip_if_needed(axis);
  return theta * axis;
}

Mat3 axis_angle_matrix_derivative(const Vec3& axis_angle, int coord) {
  if (coord < 0 || coord > 2) {
    throw ParamError("axis_angle_matrix_derivative: coord must be 0, 1, or 2");
  }
  const double theta2 = axis_angle.squaredNorm();
  Vec3 e = Vec3::Zero();
  e[coord] = 1.0;
  if (theta2 < kTinyAngle * kTinyAngle) {
    // Limit at the origin plus the leading symmetric correction.
    return skew(e) + 0.5 * (skew(axis_angle) * skew(e) + skew(e) * skew(axis_angle));
  }
  // Gallego-Yezzi closed form:
  //   dR/dv_i = ( v_i [v]x + [ v x (I - R) e_i ]x ) / |v|^2 * R
  const Mat3 r = axis_angle_to_matrix(axis_angle);
  const Vec3 w = axis_angle.cross((Mat3::Identity() - r) * e);
  return ((axis_angle[coord] * skew(axis_angle) + skew(w)) / theta2) * r;
}

}  // namespace bodykin
