#pragma once

#include "posefuse/dataset.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace posefuse {

struct Backbones {
  BodyBackbone body;
  HandBackbone hand;
};

/// Hand-stream outputs for both sides of a sample (zeroed observation for misses).
std::array<HandObservation, 2> observe_hands(const HandBackbone& hand, const Sample& sample);

/// Everything about a sample that does not depend on CHAM parameters.
struct PreparedSample {
  const Sample* sample = nullptr;
  SampleTargets targets;
  std::array<HandObservation, 2> obs;
  std::array<Points3d, 2> canonical_keypoints;  // empty for undetected sides
};

PreparedSample prepare_sample(const Models& m, const HandBackbone& hand, const Sample& sample);
std::vector<PreparedSample> prepare_samples(const Models& m, const HandBackbone& hand, const Dataset& d,
                                            const std::vector<int>& ids);

struct LossTerms {
  double pose = 0.0;
  double wrist = 0.0;
  double shape = 0.0;
  double kp3d = 0.0;
  double kp2d = 0.0;
  double upright = 0.0;
  double total = 0.0;

  LossTerms& operator+=(const LossTerms& o);
  LossTerms& operator*=(double s);
};

/// Whole-body keypoints of a predicted pose: body joints, then per side the
/// canonical hand keypoints rigidly aligned to the body markers, or the body
/// model's own hand keypoints when the side has no canonical hand.
template <typename Scalar>
Points3<Scalar> predicted_keypoints(const Models& m, const PoseStateT<Scalar>& pose,
                                    const std::array<Points3d, 2>& canonical) {
  const Skeleton<Scalar> sk = pose_skeleton<Scalar>(m.rig, pose);
  Points3<Scalar> out(m.layout.total(), 3);
  out.topRows(m.layout.body) = sk.joints();
  for (const Side side : kSides) {
    const auto s = static_cast<std::size_t>(side_index(side));
    const int off = m.layout.hand_offset(side);
    if (canonical[s].rows() > 0) {
      try {
        const RigidTransform<Scalar> t =
            align_hand_to_body<Scalar>(canonical[s], body_target_points<Scalar>(m.rig, sk, pose.shape, side));
        out.middleRows(off, m.layout.hand) = apply_rigid<Scalar, double>(t, canonical[s]);
        continue;
      } catch (const Error& e) {
        if (e.code() != Errc::NearDegenerateAlignment) throw;
      }
    }
    out.middleRows(off, m.layout.hand) = pose_skinned_points<Scalar>(m.rig.hand_keypoints[s], sk, pose.shape);
  }
  return out;
}

/// Supervision for one sample. Full-body samples use pose, shape and keypoint
/// terms; hand-only samples replace the body labels with global wrist
/// orientation, a shape prior and the upright regularizer. `rotations` overrides
/// the pose labels (used for label corruption during pretraining).
struct LossSpec {
  SampleKind kind = SampleKind::FullBody;
  Side single_side = Side::Right;
  const SampleTargets* targets = nullptr;
  const Eigen::VectorXd* body_shape = nullptr;
  const std::vector<Matrix3>* rotations = nullptr;
  const std::array<Points3d, 2>* canonical = nullptr;
  /// Restricts keypoint terms to these rows (frame reference still applies).
  const std::vector<int>* keypoint_rows = nullptr;
};

template <typename Scalar>
Scalar sample_loss(const Models& m, const PoseStateT<Scalar>& pred, const LossSpec& spec, const LossWeights& w,
                   LossTerms* terms) {
  const SampleTargets& tg = *spec.targets;
  LossTerms t;
  Scalar total(0.0);
  auto add = [&](double weight, const Scalar& v, double& slot) {
    slot = value_of(v);
    if (weight != 0.0) total += weight * v;
  };
  if (!is_hand_only(spec.kind)) {
    add(w.pose, pose_loss<Scalar>(pose_rotations<Scalar>(pred), spec.rotations ? *spec.rotations : tg.rotations), t.pose);
    add(w.shape, shape_loss<Scalar>(pred.shape, spec.body_shape), t.shape);
  } else {
    Scalar wl(0.0);
    int n = 0;
    for (const Side side : kSides) {
      if (spec.kind == SampleKind::SingleHand && side != spec.single_side) continue;
      const auto s = static_cast<std::size_t>(side_index(side));
      wl += wrist_orientation_loss<Scalar>(m.rig.parents, pred, tg.wrist_global[s], m.rig.wrist[s]);
      ++n;
    }
    add(w.wrist, wl / static_cast<double>(n), t.wrist);
    add(w.shape, shape_loss<Scalar>(pred.shape, nullptr), t.shape);
    add(w.upright, root_upright_loss<Scalar>(pred.root_orientation, kBodyUpAxis), t.upright);
  }
  static const std::array<Points3d, 2> kNoHands;
  const Points3<Scalar> kp = predicted_keypoints<Scalar>(m, pred, spec.canonical ? *spec.canonical : kNoHands);
  KeypointFrame frame = keypoint_frame(m.layout, spec.kind, spec.single_side, kp.rows());
  if (spec.keypoint_rows) frame.rows = *spec.keypoint_rows;
  add(w.kp3d, keypoint_loss_3d<Scalar>(kp, tg.gt.keypoints, frame), t.kp3d);
  add(w.kp2d, keypoint_loss_2d<Scalar>(kp, m.camera, tg.keypoints_2d, &frame.rows), t.kp2d);
  t.total = value_of(total);
  if (!std::isfinite(t.total)) throw Error(Errc::NonFiniteLoss, sample_kind_name(spec.kind));
  if (terms) *terms = t;
  return total;
}

LossSpec loss_spec(const PreparedSample& p);

/// Loss and its gradient with respect to the raw body-head outputs.
struct RawLoss {
  LossTerms terms;
  Eigen::VectorXd g_raw;
};

RawLoss raw_loss(const Models& m, const BodyLayout& layout, const Eigen::VectorXd& raw, const LossSpec& spec,
                 const LossWeights& w);

/// Loss value of a sample under CHAM parameters (no gradient).
LossTerms cham_loss(const Models& m, const Backbones& bb, const ChamParams& cham, const PreparedSample& p,
                    const LossWeights& w);

struct ChamLossGrad {
  LossTerms terms;
  ChamParams grad;
};

/// Loss and dL/dChamParams: loss -> body head -> frozen blocks -> modulation -> CHAM.
ChamLossGrad cham_loss_grad(const Models& m, const Backbones& bb, const ChamParams& cham, const PreparedSample& p,
                            const LossWeights& w);

struct PretrainReport {
  std::vector<double> step_loss;  // mean batch loss per step
  /// Mean loss over the whole train split, before step eval_steps[i].
  std::vector<int> eval_steps;
  std::vector<double> eval_loss;
};

/// Trains the lift and heads of the body backbone on cached final-block tokens
/// with corrupted wrist labels, then freezes it. Blocks stay at their random init.
BodyBackbone pretrain_body_backbone(const Config& cfg, const Models& m, const Dataset& d, PretrainReport* report = nullptr);

/// Ridge fit of the hand heads on detected training crops, then freezes.
HandBackbone calibrate_hand_backbone(const Config& cfg, const Dataset& d);

Backbones pretrain_backbones(const Config& cfg, const Models& m, const Dataset& d, PretrainReport* report = nullptr);

struct TrainHooks {
  /// JSONL sink, one record per step.
  std::ostream* log = nullptr;
  std::function<void(int step, const ChamParams&)> checkpoint;
  std::function<void(int epoch, const ChamParams&)> epoch_end;
};

struct TrainReport {
  int steps = 0;
  std::vector<double> epoch_loss;
};

/// Mini-batch gradient descent on CHAM only. Backbone hashes are checked before
/// and after; a mismatch throws FrozenParamsModified.
ChamParams train_cham(const Config& cfg, const Models& m, const Backbones& bb, const std::vector<PreparedSample>& train,
                      ChamParams init, const TrainHooks& hooks = {}, TrainReport* report = nullptr);

/// Hand mesh and keypoints to fit (rest pose, any rigid placement).
struct ShapeTarget {
  Points3d vertices;
  Points3d keypoints;
};

struct ShapeFitOptions {
  int iters = 500;
  double w_keypoints = 1.0;
  double w_points = 1.0;
  double w_beta = 0.001;
  /// Step size for beta (objective in mm).
  double lr_beta = 0.05;
  bool nearest_neighbor = false;
};

struct ShapeFitResult {
  Eigen::VectorXd beta;
  Rigid transform;
  std::vector<double> trace;  // objective per iteration, first entry before any step
  double point_error_mm = 0.0;
};

/// Gradient descent over beta, starting from the zero-beta model rigidly aligned
/// on the wrist and MCP keypoints; after every step the rigid placement is
/// re-solved by Kabsch on the vertices. Losses are in mm.
ShapeFitResult fit_shape_to_target(const ModelSpec& spec, const ShapeTarget& target, const ShapeFitOptions& opt = {});

/// Hand model whose shape basis is the body's basis over one hand region,
/// expressed in hand coordinates.
ModelSpec hand_with_body_basis(const ModelSpec& hand, const ModelSpec& body, Side side);

}  // namespace posefuse
