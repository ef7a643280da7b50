#pragma once

#include "posefuse/common.hpp"

#include <cmath>

namespace posefuse {

template <typename Scalar>
Mat3<Scalar> skew(const Vec3<Scalar>& v) {
  Mat3<Scalar> k;
  k << Scalar(0), -v.z(), v.y(),  //
      v.z(), Scalar(0), -v.x(),   //
      -v.y(), v.x(), Scalar(0);
  return k;
}

/// Rodrigues map. The zero vector maps to the identity.
template <typename Scalar>
Mat3<Scalar> axis_angle_to_matrix(const Vec3<Scalar>& v) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar theta2 = v.squaredNorm();
  Scalar a, b;
  if (value_of(theta2) < 1e-12) {
    a = Scalar(1) - theta2 / 6.0;
    b = Scalar(0.5) - theta2 / 24.0;
  } else {
    const Scalar theta = sqrt(theta2);
    a = sin(theta) / theta;
    b = (Scalar(1) - cos(theta)) / theta2;
  }
  const Mat3<Scalar> k = skew(v);
  Mat3<Scalar> r = Mat3<Scalar>::Identity();
  r += a * k;
  r += b * (k * k);
  return r;
}

bool is_rotation(const Matrix3& r, double tol = 1e-9);

namespace detail {

// Axis for rotations within ~1e-4 rad of pi, recovered from the symmetric part.
Vector3 near_pi_axis(const Matrix3& r, const Vector3& w, double cos_angle);

}  // namespace detail

/// Log map without the orthonormality check. Works for dual scalars; the
/// near-pi symmetric-part branch only affects the value, not derivatives.
template <typename Scalar>
Vec3<Scalar> rotation_log(const Mat3<Scalar>& r) {
  using std::atan2;
  using std::sqrt;
  Vec3<Scalar> w;
  w << (r(2, 1) - r(1, 2)) * 0.5, (r(0, 2) - r(2, 0)) * 0.5, (r(1, 0) - r(0, 1)) * 0.5;
  const Scalar c = (r.trace() - 1.0) * 0.5;
  const Scalar s2 = w.squaredNorm();
  const double s2v = value_of(s2);
  const double cv = value_of(c);
  if (cv > 0.0 && s2v < 1e-16) {
    // theta / sin(theta) ~ 1 + s^2 / 6
    return w * (Scalar(1) + s2 / 6.0);
  }
  if (cv < 0.0 && s2v < 1e-8) {
    Matrix3 rv;
    Vector3 wv;
    for (int i = 0; i < 3; ++i) {
      wv(i) = value_of(w(i));
      for (int j = 0; j < 3; ++j) rv(i, j) = value_of(r(i, j));
    }
    const Vector3 axis = detail::near_pi_axis(rv, wv, cv);
    const Scalar theta = atan2(sqrt(s2 + 1e-300), c);
    return axis.template cast<Scalar>() * theta;
  }
  const Scalar s = sqrt(s2);
  const Scalar theta = atan2(s, c);
  return w * (theta / s);
}

/// Canonical axis-angle: angle in [0, pi]; at exactly pi the first nonzero
/// axis component is positive. Throws NotARotation.
Vector3 matrix_to_axis_angle(const Matrix3& r);

/// Geodesic angle between two rotations, radians.
double rotation_geodesic(const Matrix3& a, const Matrix3& b);

inline Matrix3 rot_x(double a) { return axis_angle_to_matrix<double>(Vector3(a, 0, 0)); }
inline Matrix3 rot_y(double a) { return axis_angle_to_matrix<double>(Vector3(0, a, 0)); }
inline Matrix3 rot_z(double a) { return axis_angle_to_matrix<double>(Vector3(0, 0, a)); }

}  // namespace posefuse
