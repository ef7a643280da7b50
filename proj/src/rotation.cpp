#include "posefuse/rotation.hpp"

#include <Eigen/LU>

namespace posefuse {

bool is_rotation(const Matrix3& r, double tol) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

namespace detail {

Vector3 near_pi_axis(const Matrix3& r, const Vector3& w, double cos_angle) {
  // (R + R^T) / 2 = c I + (1 - c) a a^T
  const Matrix3 sym = 0.5 * (r + r.transpose());
  const Matrix3 outer = (sym - cos_angle * Matrix3::Identity()) / (1.0 - cos_angle);
  Eigen::Index k = 0;
  outer.diagonal().maxCoeff(&k);
  Vector3 axis = outer.col(k) / std::sqrt(std::max(outer(k, k), 1e-300));
  axis.normalize();
  // Below ~1e-12 the sign of w is rounding noise: treat the angle as exactly pi.
  const double along = axis.dot(w);
  if (w.norm() >= 1e-12) {
    if (along < 0.0) axis = -axis;
  } else {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis(i)) > 1e-12) {
        if (axis(i) < 0.0) axis = -axis;
        break;
      }
    }
  }
  return axis;
}

}  // namespace detail

Vector3 matrix_to_axis_angle(const Matrix3& r) {
  if (!is_rotation(r)) throw Error(Errc::NotARotation);
  return rotation_log<double>(r);
}

double rotation_geodesic(const Matrix3& a, const Matrix3& b) {
  const Matrix3 rel = a.transpose() * b;
  const Vector3 w(0.5 * (rel(2, 1) - rel(1, 2)), 0.5 * (rel(0, 2) - rel(2, 0)),
                  0.5 * (rel(1, 0) - rel(0, 1)));
  return std::atan2(w.norm(), 0.5 * (rel.trace() - 1.0));
}

}  // namespace posefuse
