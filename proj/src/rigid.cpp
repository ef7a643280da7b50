#include "posefuse/rigid.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>

namespace posefuse {

double registration_residual(const Rigid& t, const Points3d& src, const Points3d& dst) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    sum += (t(src.row(i).transpose()) - dst.row(i).transpose()).squaredNorm();
  }
  return sum;
}

namespace {

void check_pair(const Points3d& src, const Points3d& dst) {
  if (src.rows() != dst.rows()) throw Error(Errc::DimMismatch, "point counts");
  if (src.rows() < 3) throw Error(Errc::DegenerateConfiguration, "fewer than 3 points");
  if (!src.allFinite() || !dst.allFinite()) throw Error(Errc::NonFiniteEvaluation, "points");
}

void check_spread(const Points3d& src_c) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(src_c);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s(0) < 1e-12 || s(1) < 1e-10 * s(0)) {
    throw Error(Errc::DegenerateConfiguration, "source points collinear");
  }
}

}  // namespace

KabschSolve kabsch_solve(const Points3d& src, const Points3d& dst) {
  check_pair(src, dst);
  KabschSolve out;
  out.src_centroid = src.colwise().mean().transpose();
  out.dst_centroid = dst.colwise().mean().transpose();
  Points3d src_c = src;
  Points3d dst_c = dst;
  src_c.rowwise() -= out.src_centroid.transpose();
  dst_c.rowwise() -= out.dst_centroid.transpose();
  check_spread(src_c);

  const Matrix3 m = dst_c.transpose() * src_c;
  Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix3& u = svd.matrixU();
  const Matrix3& v = svd.matrixV();
  const double d = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Vector3 fix(1.0, 1.0, d);
  out.transform.rotation = u * fix.asDiagonal() * v.transpose();
  out.transform.translation = out.dst_centroid - out.transform.rotation * out.src_centroid;
  out.basis = v;
  out.lambda = svd.singularValues().cwiseProduct(fix);
  out.gap = std::min({std::abs(out.lambda(0) + out.lambda(1)), std::abs(out.lambda(0) + out.lambda(2)),
                      std::abs(out.lambda(1) + out.lambda(2))});
  return out;
}

Similarity procrustes_similarity(const Points3d& src, const Points3d& dst) {
  const KabschSolve k = kabsch_solve(src, dst);
  Points3d src_c = src;
  src_c.rowwise() -= k.src_centroid.transpose();
  const double spread = src_c.squaredNorm();
  Similarity out;
  out.scale = k.lambda.sum() / spread;
  out.transform.rotation = k.transform.rotation;
  out.transform.translation = k.dst_centroid - out.scale * (k.transform.rotation * k.src_centroid);
  return out;
}

Points3d apply_similarity(const Similarity& s, const Points3d& pts) {
  Points3d out(pts.rows(), 3);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) out.row(i) = s(pts.row(i).transpose()).transpose();
  return out;
}

}  // namespace posefuse
