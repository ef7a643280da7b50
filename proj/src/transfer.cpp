#include "posefuse/transfer.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

namespace posefuse {

namespace {

Eigen::MatrixXd region_weights(const ModelSpec& body_spec, const HandRegion& region, const Eigen::MatrixXd& rows_over_region) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows_over_region.rows(), body_spec.vertex_count());
  for (std::size_t i = 0; i < region.vertex_indices.size(); ++i) {
    w.col(region.vertex_indices[i]) = rows_over_region.col(static_cast<Eigen::Index>(i));
  }
  return w;
}

void check_region(const HandRegion& region, Side side) {
  if (region.vertex_indices.empty() || region.correspondence.size() != region.vertex_indices.size()) {
    throw Error(Errc::CorrespondenceMissing, side_name(side));
  }
}

}  // namespace

BodyRig make_body_rig(const ModelSpec& body_spec, const ModelSpec& hand_spec) {
  BodyRig rig;
  rig.parents = body_spec.parents;
  rig.pelvis = body_spec.joint("pelvis");
  rig.wrist = {body_spec.joint("left_wrist"), body_spec.joint("right_wrist")};
  rig.rest_joints = regress_points(body_spec, body_spec.joint_regressor);
  for (const Side side : kSides) {
    const auto s = static_cast<std::size_t>(side_index(side));
    const HandRegion& region = body_spec.region(side);
    check_region(region, side);
    if (region.marker_weights.rows() != 5 ||
        region.marker_weights.cols() != static_cast<Eigen::Index>(region.vertex_indices.size())) {
      throw Error(Errc::CorrespondenceMissing, "marker_weights");
    }
    rig.markers[s] = skinned_points(body_spec, region_weights(body_spec, region, region.marker_weights));
    // Hand joint regressor re-indexed onto the body region.
    Eigen::MatrixXd kp(hand_spec.joint_count(), static_cast<Eigen::Index>(region.vertex_indices.size()));
    for (std::size_t i = 0; i < region.correspondence.size(); ++i) {
      const int hv = region.correspondence[i];
      if (hv < 0 || hv >= hand_spec.vertex_count()) throw Error(Errc::CorrespondenceMissing, side_name(side));
      kp.col(static_cast<Eigen::Index>(i)) = hand_spec.joint_regressor.col(hv);
    }
    rig.hand_keypoints[s] = skinned_points(body_spec, region_weights(body_spec, region, kp));
  }
  return rig;
}

Points3d body_target_points(const ModelSpec& body_spec, const PoseState& pose, Side side) {
  check_side(side);
  const HandRegion& region = body_spec.region(side);
  check_region(region, side);
  const SkinnedPoints markers = skinned_points(body_spec, region_weights(body_spec, region, region.marker_weights));
  const ShapedModel shaped = shape_mesh(body_spec, pose.shape);
  const Skeleton<double> sk = forward_kinematics(body_spec, pose, shaped.rest_joints);
  return pose_skinned_points<double>(markers, sk, pose.shape);
}

CanonicalHand canonical_hand_mesh(const ModelSpec& hand_spec, const std::vector<Vector3>& theta,
                                  const Eigen::VectorXd& beta) {
  if (static_cast<int>(theta.size()) + 1 != hand_spec.joint_count()) throw Error(Errc::DimMismatch, "theta");
  PoseState pose = zero_pose(hand_spec);
  for (std::size_t j = 0; j < theta.size(); ++j) pose.local_rotations[j] = axis_angle_to_matrix<double>(theta[j]);
  pose.shape = beta;
  const ShapedModel shaped = shape_mesh(hand_spec, beta);
  const Skeleton<double> sk = forward_kinematics(hand_spec, pose, shaped.rest_joints);
  CanonicalHand out;
  out.mesh = skin_mesh(hand_spec, shaped.vertices, sk);
  out.keypoints = sk.joints();
  return out;
}

Points3d anchor_points(const Points3d& hand_keypoints) {
  Points3d a(5, 3);
  for (std::size_t i = 0; i < kHandAnchorJoints.size(); ++i) {
    if (kHandAnchorJoints[i] >= hand_keypoints.rows()) throw Error(Errc::DimMismatch, "hand keypoints");
    a.row(static_cast<Eigen::Index>(i)) = hand_keypoints.row(kHandAnchorJoints[i]);
  }
  return a;
}

Mesh transfer_hand(const Mesh& body_mesh, const Mesh& hand_mesh, const Rigid& t, const ModelSpec& body_spec, Side side,
                   const SmoothConfig& smooth) {
  return transfer_hand(body_mesh, hand_mesh, t, body_spec, side, smooth,
                       vertex_adjacency(body_mesh.faces, body_mesh.vertex_count()));
}

Mesh transfer_hand(const Mesh& body_mesh, const Mesh& hand_mesh, const Rigid& t, const ModelSpec& body_spec, Side side,
                   const SmoothConfig& smooth, const std::vector<std::vector<int>>& adj) {
  check_side(side);
  const HandRegion& region = body_spec.region(side);
  check_region(region, side);
  Mesh out = body_mesh;
  for (std::size_t i = 0; i < region.vertex_indices.size(); ++i) {
    const int hv = region.correspondence[i];
    const int bv = region.vertex_indices[i];
    if (hv < 0 || hv >= hand_mesh.vertex_count() || bv < 0 || bv >= body_mesh.vertex_count()) {
      throw Error(Errc::CorrespondenceMissing, side_name(side), static_cast<long>(i));
    }
    out.vertices.row(bv) = (t.rotation * hand_mesh.vertices.row(hv).transpose() + t.translation).transpose();
  }
  if (smooth.iters <= 0 || region.boundary_ring.empty()) return out;
  const std::vector<int> set = grow_region(adj, region.boundary_ring, smooth.band);
  Points3d disp = out.vertices - body_mesh.vertices;
  laplacian_smooth_inplace(disp, adj, set, smooth.lambda, smooth.iters);
  for (int v : set) out.vertices.row(v) = body_mesh.vertices.row(v) + disp.row(v);
  return out;
}

Eigen::MatrixXd transfer_jacobian(const Points3d& canonical_kps, const Points3d& targets, const Points3d& probes) {
  if (targets.rows() != 5) throw Error(Errc::DimMismatch, "alignment targets");
  Points3<Dual> td(5, 3);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (int c = 0; c < 3; ++c) td(i, c) = make_variable(targets(i, c), 15, 3 * i + c);
  const RigidTransform<Dual> t = align_hand_to_body<Dual>(canonical_kps, td);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * probes.rows(), 15);
  for (Eigen::Index p = 0; p < probes.rows(); ++p) {
    const Vec3<Dual> q = t(probes.row(p).transpose().cast<Dual>());
    for (int c = 0; c < 3; ++c) {
      if (q(c).derivatives().size() == 15) jac.row(3 * p + c) = q(c).derivatives().transpose();
    }
  }
  return jac;
}

double seam_discontinuity(const Mesh& mesh, const Mesh& reference, const ModelSpec& body_spec, Side side) {
  check_side(side);
  const HandRegion& region = body_spec.region(side);
  std::vector<char> in_region(static_cast<std::size_t>(reference.vertex_count()), 0);
  for (int v : region.vertex_indices) in_region[static_cast<std::size_t>(v)] = 1;
  const auto adj = vertex_adjacency(reference.faces, reference.vertex_count());
  double worst = 0.0;
  for (int v : region.vertex_indices) {
    for (int n : adj[static_cast<std::size_t>(v)]) {
      if (in_region[static_cast<std::size_t>(n)]) continue;
      const Vector3 rest = (reference.vertices.row(v) - reference.vertices.row(n)).transpose();
      const Vector3 now = (mesh.vertices.row(v) - mesh.vertices.row(n)).transpose();
      if (rest.norm() <= 0.0) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, (now - rest).norm() / rest.norm());
    }
  }
  return worst;
}

}  // namespace posefuse
