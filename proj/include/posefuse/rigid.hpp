#pragma once

#include "posefuse/common.hpp"
#include "posefuse/rotation.hpp"

#include <array>
#include <vector>

namespace posefuse {

template <typename Scalar>
struct RigidTransform {
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  static RigidTransform identity() { return {}; }

  Vec3<Scalar> operator()(const Vec3<Scalar>& p) const { return rotation * p + translation; }

  /// (a * b)(p) == a(b(p))
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  RigidTransform inverse() const {
    const Mat3<Scalar> rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  template <typename Other>
  RigidTransform<Other> cast() const {
    return {rotation.template cast<Other>(), translation.template cast<Other>()};
  }
};

using Rigid = RigidTransform<double>;

/// p_i -> R p_i + t for every row.
template <typename Scalar, typename PointScalar>
Points3<Scalar> apply_rigid(const RigidTransform<Scalar>& t, const Points3<PointScalar>& pts) {
  Points3<Scalar> out(pts.rows(), 3);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Vec3<Scalar> p = pts.row(i).transpose().template cast<Scalar>();
    out.row(i) = (t.rotation * p + t.translation).transpose();
  }
  return out;
}

/// Sum of squared distances between T(src_i) and dst_i.
double registration_residual(const Rigid& t, const Points3d& src, const Points3d& dst);

/// Internals of the SVD solve, exposed so callers can differentiate through it.
struct KabschSolve {
  Rigid transform;
  Vector3 src_centroid;
  Vector3 dst_centroid;
  /// Eigenvectors of the symmetric matrix R^T M (columns).
  Matrix3 basis;
  /// Eigenvalues of R^T M: singular values with the reflection sign folded in.
  Vector3 lambda;
  /// min_{i<j} |lambda_i + lambda_j|; the rotation derivative divides by it.
  double gap = 0.0;
};

/// Least-squares rigid fit (uniform weights). Throws DegenerateConfiguration
/// when fewer than 3 points or the source is (near) collinear.
KabschSolve kabsch_solve(const Points3d& src, const Points3d& dst);

inline Rigid kabsch_rigid(const Points3d& src, const Points3d& dst) {
  return kabsch_solve(src, dst).transform;
}

/// Rigid fit with a differentiable destination. Derivatives follow from the
/// stationarity of R^T M, solved in the eigenbasis of R^T M. Throws
/// NearDegenerateAlignment when the eigenvalue pair-sum gap is below `min_gap`.
template <typename Scalar>
RigidTransform<Scalar> kabsch_rigid(const Points3d& src, const Points3<Scalar>& dst,
                                    double min_gap = 1e-8) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return kabsch_solve(src, dst).transform;
  } else {
    const Eigen::Index n = dst.rows();
    Points3d dst_v(n, 3);
    Eigen::Index nder = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        dst_v(i, c) = value_of(dst(i, c));
        nder = std::max(nder, dst(i, c).derivatives().size());
      }
    }
    const KabschSolve sol = kabsch_solve(src, dst_v);
    if (sol.gap < min_gap) throw Error(Errc::NearDegenerateAlignment, "kabsch", -1);

    const Matrix3& r = sol.transform.rotation;
    Points3d src_c = src;
    src_c.rowwise() -= sol.src_centroid.transpose();

    // One dR per derivative direction.
    std::vector<Matrix3> dr(static_cast<std::size_t>(nder));
    Matrix3 inv_sum;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) inv_sum(i, j) = i == j ? 0.0 : 1.0 / (sol.lambda(i) + sol.lambda(j));
    for (Eigen::Index k = 0; k < nder; ++k) {
      Matrix3 dm = Matrix3::Zero();
      for (Eigen::Index i = 0; i < n; ++i) {
        Vector3 dd;
        for (int c = 0; c < 3; ++c) {
          const auto& der = dst(i, c).derivatives();
          dd(c) = der.size() > k ? der(k) : 0.0;
        }
        dm += dd * src_c.row(i);
      }
      const Matrix3 x = r.transpose() * dm - dm.transpose() * r;
      const Matrix3 xb = sol.basis.transpose() * x * sol.basis;
      const Matrix3 omega = sol.basis * xb.cwiseProduct(inv_sum) * sol.basis.transpose();
      dr[static_cast<std::size_t>(k)] = r * omega;
    }

    RigidTransform<Scalar> out;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        Eigen::VectorXd der(nder);
        for (Eigen::Index k = 0; k < nder; ++k) der(k) = dr[static_cast<std::size_t>(k)](i, j);
        out.rotation(i, j) = Scalar(r(i, j), der);
      }
    }
    Vec3<Scalar> dst_mean = Vec3<Scalar>::Zero();
    for (Eigen::Index i = 0; i < n; ++i) dst_mean += dst.row(i).transpose();
    dst_mean /= static_cast<double>(n);
    out.translation = dst_mean - out.rotation * sol.src_centroid.template cast<Scalar>();
    return out;
  }
}

struct Similarity {
  double scale = 1.0;
  Rigid transform;

  Vector3 operator()(const Vector3& p) const {
    return scale * (transform.rotation * p) + transform.translation;
  }
};

/// Least-squares similarity fit: minimizes sum |s R src_i + t - dst_i|^2.
Similarity procrustes_similarity(const Points3d& src, const Points3d& dst);

Points3d apply_similarity(const Similarity& s, const Points3d& pts);

}  // namespace posefuse
