#include "posefuse/assembly.hpp"

#include "posefuse/toy_models.hpp"

namespace posefuse {

Models make_models(const Config& cfg) {
  return make_models(cfg, generate_toy_spec(ModelKind::Body, cfg.data.spec_seed),
                     generate_toy_spec(ModelKind::Hand, cfg.data.spec_seed));
}

Models make_models(const Config& cfg, ModelSpec body, ModelSpec hand) {
  Models m;
  m.body = std::move(body);
  m.hand = std::move(hand);
  m.rig = make_body_rig(m.body, m.hand);
  m.camera.focal = Eigen::Vector2d(cfg.model.focal, cfg.model.focal);
  m.camera.principal = Eigen::Vector2d(cfg.model.image_w / 2.0, cfg.model.image_h / 2.0);
  m.grid.h = cfg.model.body_h;
  m.grid.w = cfg.model.body_w;
  m.grid.image_w = cfg.model.image_w;
  m.grid.image_h = cfg.model.image_h;
  m.grid.affine = Affine2D::scale_offset(cfg.model.image_w / cfg.model.body_w, cfg.model.image_h / cfg.model.body_h, 0, 0);
  m.smooth = {cfg.transfer.lambda, cfg.transfer.iters, cfg.transfer.band};
  m.layout.body = m.body.joint_count();
  m.layout.hand = m.hand.joint_count();
  m.layout.pelvis = m.body.joint("pelvis");
  m.hand_tips = toy_hand_tip_vertices();
  m.adjacency = vertex_adjacency(m.body.faces, m.body.vertex_count());
  for (const Side side : kSides) {
    m.seam_band[static_cast<std::size_t>(side_index(side))] =
        grow_region(m.adjacency, m.body.region(side).boundary_ring, m.smooth.band);
  }
  return m;
}

std::vector<int> region_in_hand_order(const ModelSpec& body, Side side) {
  const HandRegion& r = body.region(side);
  std::vector<int> ids(r.vertex_indices.size(), -1);
  for (std::size_t i = 0; i < r.vertex_indices.size(); ++i) {
    const int hv = r.correspondence[i];
    if (hv < 0 || hv >= static_cast<int>(ids.size())) throw Error(Errc::CorrespondenceMissing, side_name(side));
    ids[static_cast<std::size_t>(hv)] = r.vertex_indices[i];
  }
  return ids;
}

Assembly assemble(const Models& m, const PoseState& pose, const std::array<std::optional<HandEstimate>, 2>& hands) {
  Assembly out;
  out.pose = pose;
  const ShapedModel shaped = shape_mesh(m.body, pose.shape);
  const Skeleton<double> sk = forward_kinematics(m.body, pose, shaped.rest_joints);
  out.mesh = skin_mesh(m.body, shaped.vertices, sk);
  const Mesh body_only = out.mesh;
  out.keypoints.resize(m.layout.total(), 3);
  out.keypoints.topRows(m.layout.body) = sk.joints();
  for (const Side side : kSides) {
    const auto s = static_cast<std::size_t>(side_index(side));
    const int off = m.layout.hand_offset(side);
    if (!hands[s]) {
      out.keypoints.middleRows(off, m.layout.hand) = pose_skinned_points<double>(m.rig.hand_keypoints[s], sk, pose.shape);
      continue;
    }
    const CanonicalHand canon = canonical_hand_mesh(m.hand, hands[s]->theta, hands[s]->beta);
    const Points3d targets = body_target_points<double>(m.rig, sk, pose.shape, side);
    const Rigid t = align_hand_to_body<double>(canon.keypoints, targets);
    // Each side is transferred against the un-replaced body so the two seams are independent.
    const Mesh side_mesh = transfer_hand(body_only, canon.mesh, t, m.body, side, m.smooth, m.adjacency);
    for (int v : m.body.region(side).vertex_indices) out.mesh.vertices.row(v) = side_mesh.vertices.row(v);
    if (m.smooth.iters > 0) {
      for (int v : m.seam_band[s]) out.mesh.vertices.row(v) = side_mesh.vertices.row(v);
    }
    out.keypoints.middleRows(off, m.layout.hand) = apply_rigid<double, double>(t, canon.keypoints);
    out.hand[s] = t;
  }
  return out;
}

Points3d hand_tip_points(const Models& m, const Mesh& full_mesh, Side side) {
  const std::vector<int> ids = region_in_hand_order(m.body, side);
  Points3d tips(5, 3);
  for (int i = 0; i < 5; ++i) tips.row(i) = full_mesh.vertices.row(ids[static_cast<std::size_t>(m.hand_tips[static_cast<std::size_t>(i)])]);
  return tips;
}

}  // namespace posefuse
