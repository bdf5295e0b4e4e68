#pragma once

#include "bodykin/types.hpp"

namespace bodykin {

/// Cross-product matrix [v]x such that [v]x * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Rodrigues formula. Below |aa| = 1e-8 a second-order Taylor expansion of
/// the sin/cos coefficients is used to avoid 0/0.
Mat3 axis_angle_to_matrix(const Vec3& axis_angle);

/// Inverse of axis_angle_to_matrix, returning the canonical representative:
/// angle in [0, pi]; at angle pi, where the axis sign is ambiguous, the axis
/// is flipped so its first nonzero component is positive.
/// Throws ParamError if the input is not a rotation matrix (orthonormal,
/// det +1, within 1e-6).
Vec3 matrix_to_axis_angle(const Mat3& rotation);

/// Canonicalize an axis-angle vector of any magnitude < 2*pi to the same
/// convention as matrix_to_axis_angle.
Vec3 canonical_axis_angle(const Vec3& axis_angle);

/// Partial derivative of axis_angle_to_matrix with respect to one coordinate
/// of the axis-angle vector (coord in {0,1,2}). At the origin this limits to
/// skew(e_coord).
Mat3 axis_angle_matrix_derivative(const Vec3& axis_angle, int coord);

}  // namespace bodykin
