#pragma once

#include "posefuse/assembly.hpp"
#include "posefuse/config.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace posefuse {

/// Ground truth of one synthetic scene.
struct Scene {
  SampleKind kind = SampleKind::FullBody;
  Side single_side = Side::Right;  // meaningful for single_hand only
  PoseState body;
  std::array<std::vector<Vector3>, 2> theta;
  std::array<Eigen::VectorXd, 2> beta;
  std::array<bool, 2> detected{false, false};
  std::array<Affine2D, 2> crop;
  /// Hand-stream global wrist orientation (body-unaware): used by wrist_copy only.
  std::array<Matrix3, 2> stream_wrist{Matrix3::Identity(), Matrix3::Identity()};
  std::uint64_t noise_seed = 0;
};

struct Sample {
  std::uint32_t index = 0;
  Scene scene;
  TokenGrid body_tokens;
  std::array<TokenGrid, 2> hand_crops;  // empty grids for missed hands
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<int> train;
  std::vector<int> heldout;
  std::uint64_t body_spec_hash = 0;
  std::uint64_t hand_spec_hash = 0;
  std::uint64_t seed = 0;
};

/// Derived supervision for a scene.
struct SampleTargets {
  Assembly gt;
  Points2d keypoints_2d;
  std::vector<Matrix3> rotations;  // root then locals
  std::array<Matrix3, 2> wrist_global;
};

SampleTargets make_targets(const Models& m, const Scene& scene);

/// Ground-truth hand estimates for every side (used to build the GT mesh).
std::array<std::optional<HandEstimate>, 2> gt_hands(const Scene& scene);

/// Deterministic in (cfg.data, cfg.model, seed). Kind counts per split are the
/// mixture rounded by largest remainder.
Dataset generate_dataset(const Config& cfg, const Models& m, std::uint64_t seed);

/// One scene and its token rendering; `kind` fixed by the caller.
Sample generate_sample(const Config& cfg, const Models& m, std::uint64_t seed, std::uint32_t index, SampleKind kind);

/// Square crop around the projected points with `padding` * side added, shifted
/// (and if needed shrunk) to lie inside the image; 8x8 cells over the crop.
Affine2D crop_box(const Points2d& pixels, double padding, double image_w, double image_h, int grid);

/// Rotation taking the optical axis onto the viewing ray through pixel `p`.
Matrix3 ray_rotation(const Camera& cam, const Vec2<double>& p);

/// Writes manifest.json and samples.bin under `dir`. Throws IoError.
void save_dataset(const Dataset& d, const Config& cfg, const std::string& dir);
/// Throws ParseError / IoError; verifies the spec hashes against `m`.
Dataset load_dataset(const std::string& dir, const Models& m);

}  // namespace posefuse
