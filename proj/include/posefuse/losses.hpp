#pragma once

#include "posefuse/model.hpp"
#include "posefuse/rotation.hpp"

#include <optional>
#include <vector>

namespace posefuse {

enum class SampleKind : std::uint8_t { FullBody = 0, InteractingHands = 1, SingleHand = 2 };

const char* sample_kind_name(SampleKind k);
/// Throws ConfigError.
SampleKind parse_sample_kind(const std::string& name);

inline bool is_hand_only(SampleKind k) { return k != SampleKind::FullBody; }

/// Row layout of the whole-body keypoint set: body joints, then 16 left-hand
/// and 16 right-hand keypoints.
struct KeypointLayout {
  int body = 22;
  int hand = 16;
  int pelvis = 0;
  int total() const { return body + 2 * hand; }
  int hand_offset(Side s) const { return body + side_index(s) * hand; }
  int hand_wrist(Side s) const { return hand_offset(s); }
};

/// Rows supervised for a sample and the row they are expressed relative to.
struct KeypointFrame {
  int reference = 0;
  std::vector<int> rows;
};

/// Throws MissingReference when the layout cannot hold the reference row.
KeypointFrame keypoint_frame(const KeypointLayout& layout, SampleKind kind, Side single_side, Eigen::Index rows);

template <typename Scalar>
Scalar abs_l1(const Scalar& x) {
  using std::abs;
  return abs(x);
}

/// Mean l1 over canonical axis-angle components.
template <typename Scalar>
Scalar pose_loss(const std::vector<Mat3<Scalar>>& pred, const std::vector<Matrix3>& gt) {
  if (pred.size() != gt.size()) throw Error(Errc::DimMismatch, "rotation count");
  if (pred.empty()) return Scalar(0.0);
  Scalar sum(0.0);
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const Vec3<Scalar> a = rotation_log<Scalar>(pred[j]);
    const Vector3 b = matrix_to_axis_angle(gt[j]);
    for (int c = 0; c < 3; ++c) sum += abs_l1<Scalar>(a(c) - b(c));
  }
  return sum / (3.0 * static_cast<double>(pred.size()));
}

/// Root orientation followed by the local rotations.
template <typename Scalar>
std::vector<Mat3<Scalar>> pose_rotations(const PoseStateT<Scalar>& p) {
  std::vector<Mat3<Scalar>> out;
  out.reserve(p.local_rotations.size() + 1);
  out.push_back(p.root_orientation);
  for (const auto& r : p.local_rotations) out.push_back(r);
  return out;
}

/// l1 between axis-angles of the predicted global joint orientation and `gt`.
template <typename Scalar>
Scalar wrist_orientation_loss(const std::vector<int>& parents, const PoseStateT<Scalar>& pred, const Matrix3& gt,
                              int wrist_joint) {
  const Mat3<Scalar> g = global_orientation<Scalar>(parents, pred, wrist_joint);
  const Vec3<Scalar> a = rotation_log<Scalar>(g);
  const Vector3 b = matrix_to_axis_angle(gt);
  Scalar sum(0.0);
  for (int c = 0; c < 3; ++c) sum += abs_l1<Scalar>(a(c) - b(c));
  return sum / 3.0;
}

/// Throws UnknownSide.
double wrist_orientation_loss(const ModelSpec& body_spec, const PoseState& pred, const Matrix3& gt, Side side);

/// Mean l1 against `gt`, or the mean square of `pred` when no ground truth exists.
template <typename Scalar>
Scalar shape_loss(const VecX<Scalar>& pred, const Eigen::VectorXd* gt) {
  if (pred.size() == 0) return Scalar(0.0);
  Scalar sum(0.0);
  if (gt) {
    if (gt->size() != pred.size()) throw Error(Errc::DimMismatch, "beta");
    for (Eigen::Index i = 0; i < pred.size(); ++i) sum += abs_l1<Scalar>(pred(i) - (*gt)(i));
  } else {
    for (Eigen::Index i = 0; i < pred.size(); ++i) sum += pred(i) * pred(i);
  }
  return sum / static_cast<double>(pred.size());
}

/// Mean l1 of reference-relative keypoints over the frame's rows.
template <typename Scalar>
Scalar keypoint_loss_3d(const Points3<Scalar>& pred, const Points3d& gt, const KeypointFrame& frame) {
  if (pred.rows() != gt.rows()) throw Error(Errc::DimMismatch, "keypoint count");
  if (frame.reference < 0 || frame.reference >= pred.rows()) throw Error(Errc::MissingReference, "", frame.reference);
  if (frame.rows.empty()) return Scalar(0.0);
  const Vec3<Scalar> pr = pred.row(frame.reference).transpose();
  const Vector3 gr = gt.row(frame.reference).transpose();
  Scalar sum(0.0);
  for (int r : frame.rows) {
    for (int c = 0; c < 3; ++c) sum += abs_l1<Scalar>((pred(r, c) - pr(c)) - (gt(r, c) - gr(c)));
  }
  return sum / (3.0 * static_cast<double>(frame.rows.size()));
}

template <typename Scalar>
Scalar keypoint_loss_3d(const Points3<Scalar>& pred, const Points3d& gt, SampleKind kind,
                        Side single_side = Side::Right, const KeypointLayout& layout = {}) {
  return keypoint_loss_3d<Scalar>(pred, gt, keypoint_frame(layout, kind, single_side, pred.rows()));
}

/// Mean l1 in pixels between projected `pred` rows and `gt`. Throws BehindCamera.
template <typename Scalar>
Scalar keypoint_loss_2d(const Points3<Scalar>& pred, const Camera& cam, const Points2d& gt,
                        const std::vector<int>* rows = nullptr) {
  if (pred.rows() != gt.rows()) throw Error(Errc::DimMismatch, "keypoint count");
  const Points2<Scalar> proj = project_points<Scalar>(cam, pred);
  Scalar sum(0.0);
  std::size_t n = 0;
  auto add = [&](Eigen::Index r) {
    for (int c = 0; c < 2; ++c) sum += abs_l1<Scalar>(proj(r, c) - gt(r, c));
    ++n;
  };
  if (rows) {
    for (int r : *rows) add(r);
  } else {
    for (Eigen::Index r = 0; r < pred.rows(); ++r) add(r);
  }
  if (n == 0) return Scalar(0.0);
  return sum / (2.0 * static_cast<double>(n));
}

/// Up axis of the toy body in model coordinates (y points down in the camera frame).
inline const Vector3 kBodyUpAxis(0.0, -1.0, 0.0);

/// 1 - <R up_body, world_up>.
template <typename Scalar>
Scalar root_upright_loss(const Mat3<Scalar>& root, const Vector3& world_up) {
  const Vec3<Scalar> up = root * kBodyUpAxis.cast<Scalar>();
  return Scalar(1.0) - up.dot(world_up.cast<Scalar>());
}

}  // namespace posefuse
