#include "posefuse/pipeline.hpp"

#include "posefuse/metrics.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <limits>

namespace posefuse {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Frozen:
      return "frozen";
    case Strategy::WristCopy:
      return "wrist_copy";
    case Strategy::Cham:
      return "cham";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (Strategy s : {Strategy::Frozen, Strategy::WristCopy, Strategy::Cham}) {
    if (name == strategy_name(s)) return s;
  }
  throw Error(Errc::ConfigError, "unknown strategy: " + name);
}

namespace {

void set_global_wrist(const Models& m, PoseState& pose, Side side, const Matrix3& global) {
  const int j = m.rig.wrist[static_cast<std::size_t>(side_index(side))];
  const Matrix3 parent = global_orientation<double>(m.rig.parents, pose, m.rig.parents[static_cast<std::size_t>(j)]);
  pose.local_rotations[static_cast<std::size_t>(j - 1)] = parent.transpose() * global;
}

}  // namespace

InferResult infer(const Models& m, const Backbones& bb, const ChamParams* cham, const Sample& sample,
                  const InferOptions& opt) {
  return infer(m, bb, cham, sample, observe_hands(bb.hand, sample), opt);
}

InferResult infer(const Models& m, const Backbones& bb, const ChamParams* cham, const Sample& sample,
                  const std::array<HandObservation, 2>& obs, const InferOptions& opt) {
  InferResult out;
  out.obs = obs;
  if (opt.strategy == Strategy::Cham) {
    if (!cham) throw Error(Errc::InvariantViolation, "cham strategy without parameters");
    const ModulationStack mod = cham_forward(obs[0], obs[1], *cham, m.grid);
    out.pose = body_backbone_forward(bb.body, sample.body_tokens, &mod).pose;
  } else {
    out.pose = body_backbone_forward(bb.body, sample.body_tokens, nullptr).pose;
  }
  if (opt.strategy == Strategy::WristCopy) {
    for (const Side side : kSides) {
      const auto& o = obs[static_cast<std::size_t>(side_index(side))];
      if (o.detected) set_global_wrist(m, out.pose, side, o.stream_wrist);
    }
  }
  std::array<std::optional<HandEstimate>, 2> hands;
  if (opt.oracle) {
    const Scene& sc = sample.scene;
    out.pose.shape = sc.body.shape;
    for (const Side side : kSides) {
      const int j = m.rig.wrist[static_cast<std::size_t>(side_index(side))];
      set_global_wrist(m, out.pose, side, global_orientation<double>(m.rig.parents, sc.body, j));
    }
    hands = gt_hands(sc);
  } else {
    for (std::size_t s = 0; s < 2; ++s) {
      if (obs[s].detected) hands[s] = HandEstimate{obs[s].theta, obs[s].beta};
    }
  }
  out.assembly = assemble(m, out.pose, hands);
  return out;
}

std::vector<Side> evaluated_sides(const Scene& scene) {
  if (scene.kind == SampleKind::SingleHand) return {scene.single_side};
  return {Side::Left, Side::Right};
}

SampleMetrics sample_metrics(const Models& m, const Scene& scene, const Assembly& pred, const Assembly& gt) {
  SampleMetrics r;
  r.kind = scene.kind;
  const int pelvis = m.layout.pelvis;
  r.mpvpe_full = mpvpe(pred.mesh, gt.mesh, pred.keypoints.row(pelvis).transpose(), gt.keypoints.row(pelvis).transpose());
  r.pa_mpvpe = pa_mpvpe(pred.mesh, gt.mesh);
  const std::vector<Side> sides = evaluated_sides(scene);
  for (const Side side : sides) {
    const auto& ids = m.body.region(side).vertex_indices;
    const int w = m.layout.hand_wrist(side);
    r.mpvpe_hands += mpvpe(gather_rows(pred.mesh.vertices, ids), gather_rows(gt.mesh.vertices, ids),
                           pred.keypoints.row(w).transpose(), gt.keypoints.row(w).transpose());
    const int j = m.rig.wrist[static_cast<std::size_t>(side_index(side))];
    r.wrist_geodesic += rotation_geodesic(global_orientation<double>(m.rig.parents, pred.pose, j),
                                          global_orientation<double>(m.rig.parents, gt.pose, j));
  }
  r.mpvpe_hands /= static_cast<double>(sides.size());
  r.wrist_geodesic /= static_cast<double>(sides.size());
  if (sides.size() == 2) {
    const int l = m.layout.hand_wrist(Side::Left);
    const int rr = m.layout.hand_wrist(Side::Right);
    r.mrrpe = mrrpe(pred.keypoints.row(l).transpose(), pred.keypoints.row(rr).transpose(), gt.keypoints.row(l).transpose(),
                    gt.keypoints.row(rr).transpose());
  } else {
    r.mrrpe = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

MetricsReport aggregate(std::vector<SampleMetrics> samples) {
  MetricsReport r;
  int nm = 0;
  for (const auto& s : samples) {
    r.mpvpe_full += s.mpvpe_full;
    r.mpvpe_hands += s.mpvpe_hands;
    r.pa_mpvpe += s.pa_mpvpe;
    r.wrist_geodesic += s.wrist_geodesic;
    if (std::isfinite(s.mrrpe)) {
      r.mrrpe += s.mrrpe;
      ++nm;
    }
  }
  if (!samples.empty()) {
    const double inv = 1.0 / static_cast<double>(samples.size());
    r.mpvpe_full *= inv;
    r.mpvpe_hands *= inv;
    r.pa_mpvpe *= inv;
    r.wrist_geodesic *= inv;
  }
  if (nm > 0) r.mrrpe /= nm;
  r.samples = std::move(samples);
  return r;
}

MetricsReport evaluate(const Models& m, const Backbones& bb, const ChamParams* cham,
                       const std::vector<PreparedSample>& split, const InferOptions& opt) {
  if (split.empty()) throw Error(Errc::EmptySplit, "evaluate");
  std::vector<SampleMetrics> per;
  per.reserve(split.size());
  for (const PreparedSample& p : split) {
    const InferResult res = infer(m, bb, cham, *p.sample, p.obs, opt);
    SampleMetrics sm = sample_metrics(m, p.sample->scene, res.assembly, p.targets.gt);
    sm.index = p.sample->index;
    per.push_back(sm);
  }
  return aggregate(std::move(per));
}

MetricsReport run_baseline(Strategy s, const Models& m, const Backbones& bb, const ChamParams* cham,
                           const std::vector<PreparedSample>& split) {
  InferOptions opt;
  opt.strategy = s;
  return evaluate(m, bb, cham, split, opt);
}

std::string metrics_json(const MetricsReport& r, const std::string& context_json) {
  nlohmann::ordered_json doc;
  doc["metrics"] = {{"mpvpe_full_mm", r.mpvpe_full},
                    {"mpvpe_hands_mm", r.mpvpe_hands},
                    {"mrrpe_mm", r.mrrpe},
                    {"pa_mpvpe_mm", r.pa_mpvpe},
                    {"wrist_geodesic_rad", r.wrist_geodesic},
                    {"samples", r.samples.size()}};
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& s : r.samples) {
    nlohmann::ordered_json e = {{"index", s.index},
                                {"kind", sample_kind_name(s.kind)},
                                {"mpvpe_full_mm", s.mpvpe_full},
                                {"mpvpe_hands_mm", s.mpvpe_hands}};
    e["mrrpe_mm"] = std::isfinite(s.mrrpe) ? nlohmann::ordered_json(s.mrrpe) : nlohmann::ordered_json(nullptr);
    e["pa_mpvpe_mm"] = s.pa_mpvpe;
    e["wrist_geodesic_rad"] = s.wrist_geodesic;
    per.push_back(std::move(e));
  }
  doc["per_sample"] = std::move(per);
  doc["context"] = context_json.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(context_json);
  return doc.dump(1) + "\n";
}

void export_obj(const Mesh& mesh, const std::string& path) { write_obj(mesh, path); }

StageTimings report_timings(const Models& m, const Backbones& bb, const ChamParams& cham,
                            const std::vector<const Sample*>& samples, int runs) {
  if (samples.empty() || runs <= 0) throw Error(Errc::EmptySplit, "timings");
  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
  StageTimings t;
  t.runs = runs;
  for (int r = 0; r < runs; ++r) {
    const Sample& s = *samples[static_cast<std::size_t>(r) % samples.size()];
    const auto t0 = clock::now();
    const std::array<HandObservation, 2> obs = observe_hands(bb.hand, s);
    const auto t1 = clock::now();
    const ModulationStack mod = cham_forward(obs[0], obs[1], cham, m.grid);
    const auto t2 = clock::now();
    const BodyForward f = body_backbone_forward(bb.body, s.body_tokens, &mod);
    const auto t3 = clock::now();
    std::array<std::optional<HandEstimate>, 2> hands;
    for (std::size_t k = 0; k < 2; ++k) {
      if (obs[k].detected) hands[k] = HandEstimate{obs[k].theta, obs[k].beta};
    }
    const Assembly a = assemble(m, f.pose, hands);
    const auto t4 = clock::now();
    t.hand_backbone += secs(t0, t1);
    t.cham += secs(t1, t2);
    t.body_backbone += secs(t2, t3);
    t.assembly += secs(t3, t4);
    t.total += secs(t0, t4);
  }
  const double inv = 1.0 / runs;
  t.hand_backbone *= inv;
  t.cham *= inv;
  t.body_backbone *= inv;
  t.assembly *= inv;
  t.total *= inv;
  return t;
}

std::string timings_json(const StageTimings& t) {
  nlohmann::ordered_json j = {{"runs", t.runs},
                              {"mean_seconds",
                               {{"hand_backbone", t.hand_backbone},
                                {"cham", t.cham},
                                {"body_backbone", t.body_backbone},
                                {"assembly", t.assembly},
                                {"total", t.total}}},
                              {"cham_share", t.total > 0.0 ? t.cham / t.total : 0.0}};
  return j.dump(1) + "\n";
}

}  // namespace posefuse
