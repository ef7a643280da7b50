#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace posefuse {

struct DataConfig {
  int train = 2000;
  int heldout = 400;
  std::array<double, 3> mixture{0.4, 0.4, 0.2};  // full_body, interacting_hands, single_hand
  double miss_rate = 0.1;
  double crop_padding = 0.2;
  double token_noise = 0.02;
  /// Std of the wrist local rotation around its mean pose, radians.
  double wrist_spread = 0.3;
  /// Axis-angle noise of the hand-stream wrist orientation, radians.
  double hand_stream_noise = 0.35;
  /// Amplitude of the coarse hand blob visible in the body tokens.
  double body_hand_cue = 0.5;
  std::uint64_t spec_seed = 7;
};

struct ModelConfig {
  int channels = 32;
  int depth = 6;
  int body_h = 16;
  int body_w = 12;
  int body_hidden = 64;
  int lift = 512;
  int hand_grid = 8;
  int hand_depth = 4;
  int hand_hidden = 128;
  double image_w = 288.0;
  double image_h = 384.0;
  double focal = 450.0;
  std::uint64_t body_seed = 11;
  std::uint64_t hand_seed = 13;
  std::uint64_t cham_seed = 17;
};

struct PretrainConfig {
  int epochs = 5;
  int batch = 32;
  double lr = 1e-5;
  double wrist_label_noise = 0.3;
  double hand_ridge = 1e-4;
  double body_ridge = 1e-5;
  int eval_every = 100;  // steps between train-split loss evaluations
  std::uint64_t seed = 3;
};

struct LossWeights {
  double pose = 1.0;
  double wrist = 1.0;
  double shape = 1.0;
  double kp3d = 1.0;
  double kp2d = 1.0;
  double upright = 1.0;
};

struct TrainConfig {
  int epochs = 4;
  int batch = 32;
  double lr = 1e-4;
  double decay_at = 0.75;
  double decay = 0.1;
  LossWeights weights;
  int checkpoint_every = 0;  // steps; 0 disables
  std::uint64_t seed = 5;
};

struct TransferConfig {
  double lambda = 0.5;
  int iters = 5;
  int band = 1;
};

struct BenchConfig {
  int runs = 100;
};

struct Config {
  DataConfig data;
  ModelConfig model;
  PretrainConfig pretrain;
  TrainConfig train;
  TransferConfig transfer;
  BenchConfig bench;
};

/// Throws ConfigError on unknown keys, wrong types or out-of-range values.
Config config_from_json(const std::string& text);
Config load_config(const std::string& path);
/// Every key with its effective value.
std::string config_to_json(const Config& cfg);
void validate_config(const Config& cfg);

}  // namespace posefuse
