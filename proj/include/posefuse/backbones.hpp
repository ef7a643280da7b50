#pragma once

#include "posefuse/grid.hpp"
#include "posefuse/model.hpp"
#include "posefuse/rotation.hpp"

#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace posefuse {

/// D body-resolution grids, one per backbone block.
struct ModulationStack {
  std::vector<TokenGrid> grids;
};

/// Residual token-mix block followed by a channel MLP:
///   U = X + mod,  Z = U + tanh(mix U),  out = Z + tanh(Z W1^T + b1) W2^T + b2.
struct TokenBlock {
  Eigen::MatrixXd mix;  // N x N
  Eigen::MatrixXd w1;   // hidden x C
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // C x hidden
  Eigen::VectorXd b2;
};

/// Blocks plus a per-token tanh lift that is mean-pooled into a feature vector.
struct TokenNet {
  int h = 0;
  int w = 0;
  int channels = 0;
  int hidden = 0;
  int lift = 0;
  std::vector<TokenBlock> blocks;
  Eigen::MatrixXd lift_w;  // lift x C
  Eigen::VectorXd lift_b;

  int cells() const { return h * w; }
  int depth() const { return static_cast<int>(blocks.size()); }

  template <typename F>
  void visit(F&& f) {
    for (auto& b : blocks) {
      f(b.mix);
      f(b.w1);
      f(b.b1);
      f(b.w2);
      f(b.b2);
    }
    f(lift_w);
    f(lift_b);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<TokenNet*>(this)->visit([&](const auto& m) { f(m); });
  }
};

TokenNet init_token_net(std::mt19937_64& rng, int h, int w, int channels, int depth, int hidden, int lift);

/// Intermediates kept for the backward pass.
struct TokenNetTrace {
  std::vector<Eigen::MatrixXd> inputs;   // U per block
  std::vector<Eigen::MatrixXd> mixed;    // tanh(mix U)
  std::vector<Eigen::MatrixXd> hidden;   // tanh(Z W1^T + b1)
  std::vector<Eigen::MatrixXd> outputs;  // block outputs (snapshots)
  Eigen::MatrixXd features;              // N x lift
  Eigen::VectorXd pooled;
};

/// `modulation`, when given, holds one N x C matrix per block.
TokenNetTrace token_net_forward(const TokenNet& net, const Eigen::MatrixXd& x,
                                const std::vector<const Eigen::MatrixXd*>* modulation);

struct TokenNetGrad {
  std::vector<Eigen::MatrixXd> modulation;  // dL/dmod_k (== dL/dU_k)
  Eigen::MatrixXd lift_w;
  Eigen::VectorXd lift_b;
};

/// Reverse pass from dL/dpooled. Parameter gradients are produced only for the lift.
TokenNetGrad token_net_backward(const TokenNet& net, const TokenNetTrace& trace, const Eigen::VectorXd& g_pooled,
                                bool lift_grads);

inline constexpr double kAxisAngleClamp = std::numbers::pi - 1e-3;
inline constexpr double kRootDepthPrior = 3.0;

/// v * a * tanh(|v| / a) / |v|: keeps the angle below a.
template <typename Scalar>
Vec3<Scalar> soft_clamp_axis_angle(const Vec3<Scalar>& v, double a = kAxisAngleClamp) {
  using std::sqrt;
  using std::tanh;
  const Scalar n2 = v.squaredNorm();
  if (value_of(n2) < 1e-16) return v * (Scalar(1.0) - n2 / (3.0 * a * a));
  const Scalar n = sqrt(n2);
  return v * (tanh(n / a) * a / n);
}

/// Raw body head layout: root axis-angle | root translation | local axis-angles | shape.
struct BodyLayout {
  int joints = 22;
  int shape_dim = 10;
  int root_aa() const { return 0; }
  int root_t() const { return 3; }
  int local(int j) const { return 6 + 3 * (j - 1); }
  int shape() const { return 6 + 3 * (joints - 1); }
  int size() const { return shape() + shape_dim; }
};

template <typename Scalar>
PoseStateT<Scalar> decode_body_raw(const VecX<Scalar>& raw, const BodyLayout& layout) {
  if (raw.size() != layout.size()) throw Error(Errc::DimMismatch, "raw head output");
  PoseStateT<Scalar> p;
  p.root_orientation = axis_angle_to_matrix<Scalar>(soft_clamp_axis_angle<Scalar>(raw.template segment<3>(layout.root_aa())));
  p.root_translation = raw.template segment<3>(layout.root_t());
  p.root_translation(2) += kRootDepthPrior;
  p.local_rotations.resize(static_cast<std::size_t>(layout.joints - 1));
  for (int j = 1; j < layout.joints; ++j) {
    p.local_rotations[static_cast<std::size_t>(j - 1)] =
        axis_angle_to_matrix<Scalar>(soft_clamp_axis_angle<Scalar>(raw.template segment<3>(layout.local(j))));
  }
  p.shape = raw.segment(layout.shape(), layout.shape_dim);
  return p;
}

/// Inverse of decode_body_raw for angles below the clamp.
Eigen::VectorXd encode_body_raw(const PoseState& pose, const BodyLayout& layout);

struct BodyBackbone {
  BodyLayout layout;
  TokenNet net;
  Eigen::MatrixXd pose_w;  // (6 + 3(J-1)) x lift
  Eigen::VectorXd pose_b;
  Eigen::MatrixXd shape_w;  // B x lift
  Eigen::VectorXd shape_b;
  bool frozen = false;
  std::uint64_t hash = 0;

  int depth() const { return net.depth(); }

  template <typename F>
  void visit(F&& f) {
    net.visit(f);
    f(pose_w);
    f(pose_b);
    f(shape_w);
    f(shape_b);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<BodyBackbone*>(this)->visit([&](const auto& m) { f(m); });
  }
};

struct BodyBackboneConfig {
  int depth = 6;
  int channels = 32;
  int grid_h = 16;
  int grid_w = 12;
  int hidden = 64;
  int lift = 128;
};

BodyBackbone init_body_backbone(std::uint64_t seed, const BodyBackboneConfig& cfg, const BodyLayout& layout);

struct BodyForward {
  Eigen::VectorXd raw;
  PoseState pose;
  TokenNetTrace trace;  // trace.outputs are the per-block snapshots
};

/// Throws DimMismatch when the input grid or a modulation grid has the wrong shape.
BodyForward body_backbone_forward(const BodyBackbone& params, const TokenGrid& input, const ModulationStack* modulation);

Eigen::VectorXd body_head(const BodyBackbone& params, const Eigen::VectorXd& pooled);

/// dL/dpooled from dL/draw.
Eigen::VectorXd body_head_backward(const BodyBackbone& params, const Eigen::VectorXd& g_raw);

inline constexpr int kFingerJoints = 15;
inline constexpr int kHandShapeDim = 10;

struct HandObservation {
  Side side = Side::Left;
  bool detected = false;
  Affine2D crop_affine;
  TokenGrid tokens;
  std::vector<Vector3> theta;  // 15 finger axis-angles; empty when undetected
  Eigen::VectorXd beta;        // empty when undetected
  /// Hand-stream global wrist orientation, used only by the wrist_copy strategy.
  Matrix3 stream_wrist = Matrix3::Identity();
};

struct HandBackbone {
  TokenNet net;
  Eigen::MatrixXd theta_w;  // 45 x lift
  Eigen::VectorXd theta_b;
  Eigen::MatrixXd beta_w;  // 10 x lift
  Eigen::VectorXd beta_b;
  bool frozen = false;
  std::uint64_t hash = 0;

  template <typename F>
  void visit(F&& f) {
    net.visit(f);
    f(theta_w);
    f(theta_b);
    f(beta_w);
    f(beta_b);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<HandBackbone*>(this)->visit([&](const auto& m) { f(m); });
  }
};

struct HandBackboneConfig {
  int channels = 32;
  int grid = 8;
  int depth = 4;
  int hidden = 128;
  int lift = 128;
};

HandBackbone init_hand_backbone(std::uint64_t seed, const HandBackboneConfig& cfg);

/// Pooled lift features of a crop (the input to the theta / beta heads).
Eigen::VectorXd hand_features(const HandBackbone& params, const TokenGrid& crop);

/// Throws DimMismatch unless crop is grid x grid x C.
HandObservation hand_backbone_forward(const HandBackbone& params, const TokenGrid& crop, Side side);

/// The zeroed observation used for a missed detection.
HandObservation undetected_hand(const HandBackbone& params, Side side);

/// Centered ridge regression: rows of y ~ w * feature row + b.
void ridge_fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& y, double ridge, Eigen::MatrixXd& w,
               Eigen::VectorXd& b);

/// Closed-form ridge fit of the theta / beta heads on pooled features (one row per crop).
void calibrate_hand_heads(HandBackbone& params, const Eigen::MatrixXd& features, const Eigen::MatrixXd& theta,
                          const Eigen::MatrixXd& beta, double ridge);

template <typename Params>
std::uint64_t params_hash(const Params& p);

void freeze(BodyBackbone& p);
void freeze(HandBackbone& p);
/// Throws FrozenParamsModified when the content no longer matches the recorded hash.
void verify_frozen(const BodyBackbone& p);
void verify_frozen(const HandBackbone& p);

std::string serialize_body_backbone(const BodyBackbone& p);
BodyBackbone deserialize_body_backbone(const std::string& bytes);
std::string serialize_hand_backbone(const HandBackbone& p);
HandBackbone deserialize_hand_backbone(const std::string& bytes);

}  // namespace posefuse
