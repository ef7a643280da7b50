#pragma once

#include "posefuse/rotation.hpp"

#include <Eigen/Geometry>

#include <random>

namespace testutil {

using posefuse::Matrix3;
using posefuse::Points3d;
using posefuse::Vector3;

inline Vector3 random_axis_angle(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Vector3 axis(n(rng), n(rng), n(rng));
  return axis.normalized() * u(rng);
}

inline Matrix3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
}

inline Points3d random_points(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Points3d p(n, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = g(rng);
  return p;
}

inline Points3d transform(const Matrix3& r, const Vector3& t, const Points3d& p) {
  Points3d out(p.rows(), 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.row(i) = (r * p.row(i).transpose() + t).transpose();
  return out;
}

}  // namespace testutil
