#pragma once

#include "posefuse/train.hpp"

#include <string>
#include <vector>

namespace posefuse {

enum class Strategy { Frozen, WristCopy, Cham };

const char* strategy_name(Strategy s);
/// Throws ConfigError.
Strategy parse_strategy(const std::string& name);

struct InferOptions {
  Strategy strategy = Strategy::Cham;
  /// Replace the hand stream and the wrist/shape estimate with ground truth.
  bool oracle = false;
};

struct InferResult {
  std::array<HandObservation, 2> obs;
  PoseState pose;
  Assembly assembly;
};

/// Feed-forward pipeline: hands -> CHAM -> body backbone -> mesh -> hand transfer.
/// `cham` may be null for the frozen and wrist_copy strategies.
InferResult infer(const Models& m, const Backbones& bb, const ChamParams* cham, const Sample& sample,
                  const InferOptions& opt = {});

/// Same, reusing precomputed hand observations.
InferResult infer(const Models& m, const Backbones& bb, const ChamParams* cham, const Sample& sample,
                  const std::array<HandObservation, 2>& obs, const InferOptions& opt = {});

/// Per-sample errors. Hand and wrist terms average over the sides a sample
/// evaluates (one side for single_hand, both otherwise); mrrpe is NaN for
/// single_hand samples.
struct SampleMetrics {
  std::uint32_t index = 0;
  SampleKind kind = SampleKind::FullBody;
  double mpvpe_full = 0.0;
  double mpvpe_hands = 0.0;
  double mrrpe = 0.0;
  double pa_mpvpe = 0.0;
  double wrist_geodesic = 0.0;
};

struct MetricsReport {
  double mpvpe_full = 0.0;
  double mpvpe_hands = 0.0;
  double mrrpe = 0.0;
  double pa_mpvpe = 0.0;
  double wrist_geodesic = 0.0;
  std::vector<SampleMetrics> samples;
};

/// Sides evaluated for hand metrics.
std::vector<Side> evaluated_sides(const Scene& scene);

SampleMetrics sample_metrics(const Models& m, const Scene& scene, const Assembly& pred, const Assembly& gt);

/// Means over samples (mrrpe over samples where it is defined).
MetricsReport aggregate(std::vector<SampleMetrics> samples);

/// Throws EmptySplit.
MetricsReport evaluate(const Models& m, const Backbones& bb, const ChamParams* cham,
                       const std::vector<PreparedSample>& split, const InferOptions& opt = {});

MetricsReport run_baseline(Strategy s, const Models& m, const Backbones& bb, const ChamParams* cham,
                           const std::vector<PreparedSample>& split);

/// JSON document with the aggregate, the per-sample array and a context object
/// (config echo, seeds, hashes) supplied by the caller as a JSON string.
std::string metrics_json(const MetricsReport& r, const std::string& context_json);

/// Throws IoError.
void export_obj(const Mesh& mesh, const std::string& path);

struct StageTimings {
  int runs = 0;
  double hand_backbone = 0.0;  // seconds, mean per run
  double cham = 0.0;
  double body_backbone = 0.0;
  double assembly = 0.0;
  double total = 0.0;
};

/// Times every stage of the cham pipeline over `runs` passes cycling through `samples`.
StageTimings report_timings(const Models& m, const Backbones& bb, const ChamParams& cham,
                            const std::vector<const Sample*>& samples, int runs);

std::string timings_json(const StageTimings& t);

}  // namespace posefuse
