#pragma once

#include "posefuse/cham.hpp"
#include "posefuse/config.hpp"
#include "posefuse/losses.hpp"
#include "posefuse/transfer.hpp"

#include <array>
#include <optional>

namespace posefuse {

/// Specs and fixed geometry shared by generation, training and inference.
struct Models {
  ModelSpec body;
  ModelSpec hand;
  BodyRig rig;
  Camera camera;
  BodyGridGeometry grid;
  SmoothConfig smooth;
  KeypointLayout layout;
  std::array<int, 5> hand_tips{};  // hand-model tip vertices
  std::vector<std::vector<int>> adjacency;  // body mesh
  std::array<std::vector<int>, 2> seam_band;  // smoothed vertices per side
};

Models make_models(const Config& cfg);
Models make_models(const Config& cfg, ModelSpec body, ModelSpec hand);

struct HandEstimate {
  std::vector<Vector3> theta;
  Eigen::VectorXd beta;
};

/// Full-body output: body mesh with transferred hands and the whole-body keypoints.
struct Assembly {
  PoseState pose;
  Mesh mesh;
  Points3d keypoints;                        // layout.total() rows
  std::array<std::optional<Rigid>, 2> hand;  // alignment used per transferred side
};

/// Sides without an estimate keep the body model's own hand region.
Assembly assemble(const Models& m, const PoseState& pose, const std::array<std::optional<HandEstimate>, 2>& hands);

/// Hand-model tip points (5 x 3) of a transferred hand, in camera coordinates.
Points3d hand_tip_points(const Models& m, const Mesh& full_mesh, Side side);

/// Body vertex ids of a side's hand region in hand-model vertex order.
std::vector<int> region_in_hand_order(const ModelSpec& body, Side side);

}  // namespace posefuse
