#pragma once

#include "posefuse/mesh.hpp"
#include "posefuse/model.hpp"
#include "posefuse/rigid.hpp"

#include <array>
#include <vector>

namespace posefuse {

/// Body-side lookups precomputed from a body spec and the hand spec it was built with.
struct BodyRig {
  std::vector<int> parents;
  int pelvis = 0;
  std::array<int, 2> wrist{};
  LinearPoints rest_joints;
  std::array<SkinnedPoints, 2> markers;         // 5 anchors per side
  std::array<SkinnedPoints, 2> hand_keypoints;  // 16 hand-model joints regressed from the region
};

/// Throws CorrespondenceMissing when a hand region does not match the hand model.
BodyRig make_body_rig(const ModelSpec& body_spec, const ModelSpec& hand_spec);

template <typename Scalar>
Skeleton<Scalar> pose_skeleton(const BodyRig& rig, const PoseStateT<Scalar>& pose) {
  return forward_kinematics<Scalar>(rig.parents, pose, rig.rest_joints.eval<Scalar>(pose.shape));
}

inline void check_side(Side side) {
  if (side != Side::Left && side != Side::Right) throw Error(Errc::UnknownSide, "", static_cast<long>(side));
}

/// Posed wrist + index/middle/ring/pinky MCP markers of one side.
template <typename Scalar>
Points3<Scalar> body_target_points(const BodyRig& rig, const Skeleton<Scalar>& skeleton, const VecX<Scalar>& beta,
                                   Side side) {
  check_side(side);
  return pose_skinned_points<Scalar>(rig.markers[static_cast<std::size_t>(side_index(side))], skeleton, beta);
}

template <typename Scalar>
Points3<Scalar> body_target_points(const BodyRig& rig, const PoseStateT<Scalar>& pose, Side side) {
  return body_target_points<Scalar>(rig, pose_skeleton<Scalar>(rig, pose), pose.shape, side);
}

/// Convenience form that builds the marker regressor from the body spec alone.
Points3d body_target_points(const ModelSpec& body_spec, const PoseState& pose, Side side);

struct CanonicalHand {
  Mesh mesh;
  Points3d keypoints;  // 16 x 3, wrist at the hand-model root
};

/// Hand posed with identity root orientation and zero translation. Throws DimMismatch.
CanonicalHand canonical_hand_mesh(const ModelSpec& hand_spec, const std::vector<Vector3>& theta,
                                  const Eigen::VectorXd& beta);

/// Wrist and four MCP rows of a 16-joint hand keypoint set.
Points3d anchor_points(const Points3d& hand_keypoints);

/// Rigid Kabsch fit of the canonical anchors onto the 5 body targets.
template <typename Scalar>
RigidTransform<Scalar> align_hand_to_body(const Points3d& canonical_kps, const Points3<Scalar>& targets) {
  if (targets.rows() != 5) throw Error(Errc::DimMismatch, "alignment targets");
  return kabsch_rigid<Scalar>(anchor_points(canonical_kps), targets);
}

struct SmoothConfig {
  double lambda = 0.5;
  int iters = 5;
  int band = 1;
};

/// Overwrites the side's hand region with T(hand vertices) and smooths the seam.
/// Smoothing acts on the displacement from `body_mesh` over the boundary ring
/// grown by `band` rings, so a seam that already matches is left in place.
/// Vertices outside the region and band are bit-identical to `body_mesh`.
Mesh transfer_hand(const Mesh& body_mesh, const Mesh& hand_mesh, const Rigid& t, const ModelSpec& body_spec, Side side,
                   const SmoothConfig& smooth);

/// Same, with the body mesh adjacency precomputed.
Mesh transfer_hand(const Mesh& body_mesh, const Mesh& hand_mesh, const Rigid& t, const ModelSpec& body_spec, Side side,
                   const SmoothConfig& smooth, const std::vector<std::vector<int>>& adjacency);

/// d(T(v)) / d(targets) for each probe v: (3P) x 15, column 3i + axis of target i.
/// Throws NearDegenerateAlignment.
Eigen::MatrixXd transfer_jacobian(const Points3d& canonical_kps, const Points3d& targets, const Points3d& probes);

/// Largest relative edge change |e - e_ref| / |e_ref| over edges between the
/// side's hand region and the rest of the body; 0 for a seamless transfer.
double seam_discontinuity(const Mesh& mesh, const Mesh& reference, const ModelSpec& body_spec, Side side);

}  // namespace posefuse
