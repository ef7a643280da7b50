#pragma once

#include "posefuse/pipeline.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testutil {

/// Toy dimensions used across the unit tests (C=8, D=2).
inline posefuse::Config small_config() {
  posefuse::Config c;
  c.data.train = 48;
  c.data.heldout = 12;
  c.model.channels = 8;
  c.model.depth = 2;
  c.model.body_hidden = 16;
  c.model.lift = 32;
  c.model.hand_depth = 2;
  c.model.hand_hidden = 16;
  c.pretrain.epochs = 1;
  c.pretrain.batch = 8;
  c.train.epochs = 1;
  c.train.batch = 8;
  return c;
}

inline const posefuse::Models& small_models() {
  static const posefuse::Models m = posefuse::make_models(small_config());
  return m;
}

inline const posefuse::Dataset& small_dataset() {
  static const posefuse::Dataset d = posefuse::generate_dataset(small_config(), small_models(), 42);
  return d;
}

/// Random heads at a scale that gives non-trivial poses; not frozen.
inline posefuse::Backbones random_backbones(std::uint64_t seed = 1) {
  const posefuse::Config c = small_config();
  posefuse::BodyBackboneConfig bc;
  bc.depth = c.model.depth;
  bc.channels = c.model.channels;
  bc.hidden = c.model.body_hidden;
  bc.lift = c.model.lift;
  posefuse::Backbones bb;
  bb.body = posefuse::init_body_backbone(seed, bc, posefuse::BodyLayout{});
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> n(0.0, 0.05);
  for (Eigen::Index i = 0; i < bb.body.pose_w.size(); ++i) bb.body.pose_w.data()[i] = n(rng);
  posefuse::HandBackboneConfig hc;
  hc.channels = c.model.channels;
  hc.grid = c.model.hand_grid;
  hc.depth = c.model.hand_depth;
  hc.hidden = c.model.hand_hidden;
  hc.lift = c.model.lift;
  bb.hand = posefuse::init_hand_backbone(seed + 1, hc);
  for (Eigen::Index i = 0; i < bb.hand.theta_w.size(); ++i) bb.hand.theta_w.data()[i] = n(rng);
  return bb;
}

/// Same as random_backbones, frozen.
inline posefuse::Backbones frozen_backbones(std::uint64_t seed = 1) {
  posefuse::Backbones bb = random_backbones(seed);
  posefuse::freeze(bb.body);
  posefuse::freeze(bb.hand);
  return bb;
}

/// Fills every CHAM tensor with N(0, sigma).
inline void randomize(posefuse::ChamParams& p, std::uint64_t seed, double sigma = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  Eigen::VectorXd v = posefuse::flatten(p);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
  posefuse::unflatten(p, v);
}

/// First sample of the given kind (optionally requiring both hands detected).
inline const posefuse::Sample& find_sample(posefuse::SampleKind kind, bool both_hands = false) {
  for (const auto& s : small_dataset().samples) {
    if (s.scene.kind != kind) continue;
    if (both_hands && !(s.scene.detected[0] && s.scene.detected[1])) continue;
    return s;
  }
  throw std::runtime_error("no such sample");
}

/// Fresh directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("posefuse_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace testutil
