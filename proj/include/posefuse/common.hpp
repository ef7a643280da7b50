#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <unsupported/Eigen/AutoDiff>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace posefuse {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
/// N×3 point set, one point per row.
template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
/// N×2 pixel coordinates, one point per row.
template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, Eigen::Dynamic, 2, Eigen::RowMajor>;

using Vector3 = Vec3<double>;
using Matrix3 = Mat3<double>;
using Points3d = Points3<double>;
using Points2d = Points2<double>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Forward-mode dual number with a runtime-sized derivative vector.
using Dual = Eigen::AutoDiffScalar<Eigen::VectorXd>;

template <typename T>
struct is_dual : std::false_type {};
template <typename D>
struct is_dual<Eigen::AutoDiffScalar<D>> : std::true_type {};
template <typename T>
inline constexpr bool is_dual_v = is_dual<T>::value;

inline double value_of(double x) { return x; }
template <typename D>
double value_of(const Eigen::AutoDiffScalar<D>& x) {
  return x.value();
}

/// Seeds variable `i` of `n` with a unit derivative.
inline Dual make_variable(double value, Eigen::Index n, Eigen::Index i) {
  return Dual(value, n, i);
}

enum class Errc {
  NotARotation,
  DegenerateConfiguration,
  NearDegenerateAlignment,
  InvalidDims,
  DimMismatch,
  IsolatedVertex,
  NonFiniteEvaluation,
  NonFiniteLoss,
  ParseError,
  InvariantViolation,
  UnknownJoint,
  UnknownSide,
  BehindCamera,
  MissingReference,
  CorrespondenceMissing,
  FrozenParamsModified,
  ConfigError,
  EmptySplit,
  IoError,
};

const char* errc_name(Errc code);

/// Single exception type for the library; `code()` selects the failure kind and
/// `detail()` names the offending field, joint, or index where one exists.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail = {}, long index = -1);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  long index() const noexcept { return index_; }

 private:
  Errc code_;
  std::string detail_;
  long index_;
};

enum class Side { Left = 0, Right = 1 };

inline const char* side_name(Side s) { return s == Side::Left ? "left" : "right"; }
inline int side_index(Side s) { return static_cast<int>(s); }
inline constexpr Side kSides[2] = {Side::Left, Side::Right};

}  // namespace posefuse
