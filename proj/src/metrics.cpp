#include "posefuse/metrics.hpp"

#include "posefuse/losses.hpp"
#include "posefuse/rigid.hpp"
#include "posefuse/transfer.hpp"

namespace posefuse {

double mpvpe(const Points3d& pred, const Points3d& gt, const Vector3& align_pred, const Vector3& align_gt) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) throw Error(Errc::DimMismatch, "vertex count");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    sum += ((pred.row(i).transpose() - align_pred) - (gt.row(i).transpose() - align_gt)).norm();
  }
  return 1000.0 * sum / static_cast<double>(pred.rows());
}

double mrrpe(const Vector3& pred_left, const Vector3& pred_right, const Vector3& gt_left, const Vector3& gt_right) {
  return 1000.0 * ((pred_left - pred_right) - (gt_left - gt_right)).norm();
}

double pa_mpvpe(const Points3d& pred, const Points3d& gt) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) throw Error(Errc::DimMismatch, "vertex count");
  const Similarity s = procrustes_similarity(pred, gt);
  const Points3d aligned = apply_similarity(s, pred);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) sum += (aligned.row(i) - gt.row(i)).norm();
  return 1000.0 * sum / static_cast<double>(pred.rows());
}

Points3d gather_rows(const Points3d& pts, const std::vector<int>& ids) {
  Points3d out(static_cast<Eigen::Index>(ids.size()), 3);
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts.row(ids[i]);
  return out;
}

const char* sample_kind_name(SampleKind k) {
  switch (k) {
    case SampleKind::FullBody:
      return "full_body";
    case SampleKind::InteractingHands:
      return "interacting_hands";
    case SampleKind::SingleHand:
      return "single_hand";
  }
  return "?";
}

SampleKind parse_sample_kind(const std::string& name) {
  if (name == "full_body") return SampleKind::FullBody;
  if (name == "interacting_hands") return SampleKind::InteractingHands;
  if (name == "single_hand") return SampleKind::SingleHand;
  throw Error(Errc::ConfigError, "sample kind " + name);
}

KeypointFrame keypoint_frame(const KeypointLayout& layout, SampleKind kind, Side single_side, Eigen::Index rows) {
  KeypointFrame f;
  switch (kind) {
    case SampleKind::FullBody:
      f.reference = layout.pelvis;
      for (int r = 0; r < layout.total(); ++r) f.rows.push_back(r);
      break;
    case SampleKind::InteractingHands:
      f.reference = layout.hand_wrist(Side::Right);
      for (int r = layout.body; r < layout.total(); ++r) f.rows.push_back(r);
      break;
    case SampleKind::SingleHand:
      check_side(single_side);
      f.reference = layout.hand_wrist(single_side);
      for (int r = 0; r < layout.hand; ++r) f.rows.push_back(layout.hand_offset(single_side) + r);
      break;
  }
  if (f.reference >= rows) throw Error(Errc::MissingReference, sample_kind_name(kind), f.reference);
  for (int r : f.rows) {
    if (r >= rows) throw Error(Errc::MissingReference, sample_kind_name(kind), r);
  }
  return f;
}

double wrist_orientation_loss(const ModelSpec& body_spec, const PoseState& pred, const Matrix3& gt, Side side) {
  check_side(side);
  const int j = body_spec.joint(side == Side::Left ? "left_wrist" : "right_wrist");
  return wrist_orientation_loss<double>(body_spec.parents, pred, gt, j);
}

}  // namespace posefuse
