#include "posefuse/config.hpp"

#include "posefuse/common.hpp"
#include "posefuse/serialize.hpp"

#include <json.hpp>

namespace posefuse {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataConfig, train, heldout, mixture, miss_rate, crop_padding,
                                                token_noise, wrist_spread, hand_stream_noise, body_hand_cue,
                                                spec_seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, channels, depth, body_h, body_w, body_hidden, lift,
                                                hand_grid, hand_depth, hand_hidden, image_w, image_h, focal,
                                                body_seed, hand_seed, cham_seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PretrainConfig, epochs, batch, lr, wrist_label_noise,
                                                hand_ridge, body_ridge, eval_every, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossWeights, pose, wrist, shape, kp3d, kp2d, upright)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, epochs, batch, lr, decay_at, decay, weights,
                                                checkpoint_every, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TransferConfig, lambda, iters, band)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BenchConfig, runs)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Config, data, model, pretrain, train, transfer, bench)

namespace {

using nlohmann::json;

// Every key of `given` must exist in `known`, recursively through objects.
void reject_unknown(const json& given, const json& known, const std::string& path) {
  if (!given.is_object()) throw Error(Errc::ConfigError, (path.empty() ? "config" : path) + " is not an object");
  for (const auto& [key, value] : given.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (!known.contains(key)) throw Error(Errc::ConfigError, "unknown key " + p);
    if (known[key].is_object()) reject_unknown(value, known[key], p);
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::ConfigError, what);
}

}  // namespace

void validate_config(const Config& c) {
  require(c.data.train >= 0 && c.data.heldout >= 0, "data.train/heldout");
  double sum = 0.0;
  for (double m : c.data.mixture) {
    require(m >= 0.0, "data.mixture");
    sum += m;
  }
  require(sum > 0.0, "data.mixture");
  require(c.data.miss_rate >= 0.0 && c.data.miss_rate < 1.0, "data.miss_rate");
  require(c.data.crop_padding >= 0.0 && c.data.crop_padding <= 2.0, "data.crop_padding");
  require(c.data.token_noise >= 0.0 && c.data.wrist_spread >= 0.0 && c.data.hand_stream_noise >= 0.0 &&
              c.data.body_hand_cue >= 0.0,
          "data noise levels");
  require(c.model.channels > 0 && c.model.channels % 4 == 0, "model.channels");
  require(c.model.depth > 0 && c.model.body_h > 0 && c.model.body_w > 0 && c.model.body_hidden > 0 && c.model.lift > 0,
          "model body dims");
  require(c.model.hand_grid > 0 && c.model.hand_depth > 0 && c.model.hand_hidden > 0, "model hand dims");
  require(c.model.image_w > 0 && c.model.image_h > 0 && c.model.focal > 0, "model camera");
  require(c.pretrain.epochs >= 0 && c.pretrain.batch > 0 && c.pretrain.lr > 0 && c.pretrain.hand_ridge > 0 && c.pretrain.body_ridge > 0 && c.pretrain.eval_every > 0 &&
              c.pretrain.wrist_label_noise >= 0,
          "pretrain");
  require(c.train.epochs >= 0 && c.train.batch > 0 && c.train.lr > 0 && c.train.decay > 0 && c.train.decay_at >= 0 &&
              c.train.decay_at <= 1 && c.train.checkpoint_every >= 0,
          "train");
  const LossWeights& w = c.train.weights;
  require(w.pose >= 0 && w.wrist >= 0 && w.shape >= 0 && w.kp3d >= 0 && w.kp2d >= 0 && w.upright >= 0,
          "train.weights");
  require(c.transfer.lambda > 0 && c.transfer.lambda <= 1 && c.transfer.iters >= 0 && c.transfer.band >= 0,
          "transfer");
  require(c.bench.runs > 0, "bench.runs");
}

Config config_from_json(const std::string& text) {
  json given;
  try {
    given = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, e.what());
  }
  const json known = Config{};
  reject_unknown(given, known, "");
  Config cfg;
  try {
    cfg = given.get<Config>();
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, e.what());
  }
  validate_config(cfg);
  return cfg;
}

Config load_config(const std::string& path) { return config_from_json(read_file(path)); }

std::string config_to_json(const Config& cfg) { return json(cfg).dump(2); }

}  // namespace posefuse
