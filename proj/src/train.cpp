#include "posefuse/train.hpp"

#include "posefuse/toy_models.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace posefuse {

LossTerms& LossTerms::operator+=(const LossTerms& o) {
  pose += o.pose;
  wrist += o.wrist;
  shape += o.shape;
  kp3d += o.kp3d;
  kp2d += o.kp2d;
  upright += o.upright;
  total += o.total;
  return *this;
}

LossTerms& LossTerms::operator*=(double s) {
  pose *= s;
  wrist *= s;
  shape *= s;
  kp3d *= s;
  kp2d *= s;
  upright *= s;
  total *= s;
  return *this;
}

std::array<HandObservation, 2> observe_hands(const HandBackbone& hand, const Sample& sample) {
  std::array<HandObservation, 2> obs;
  for (const Side side : kSides) {
    const auto s = static_cast<std::size_t>(side_index(side));
    if (sample.scene.detected[s]) {
      obs[s] = hand_backbone_forward(hand, sample.hand_crops[s], side);
      obs[s].crop_affine = sample.scene.crop[s];
      obs[s].stream_wrist = sample.scene.stream_wrist[s];
    } else {
      obs[s] = undetected_hand(hand, side);
    }
  }
  return obs;
}

PreparedSample prepare_sample(const Models& m, const HandBackbone& hand, const Sample& sample) {
  PreparedSample p;
  p.sample = &sample;
  p.targets = make_targets(m, sample.scene);
  p.obs = observe_hands(hand, sample);
  for (std::size_t s = 0; s < 2; ++s) {
    if (p.obs[s].detected) p.canonical_keypoints[s] = canonical_hand_mesh(m.hand, p.obs[s].theta, p.obs[s].beta).keypoints;
  }
  return p;
}

std::vector<PreparedSample> prepare_samples(const Models& m, const HandBackbone& hand, const Dataset& d,
                                            const std::vector<int>& ids) {
  std::vector<PreparedSample> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(prepare_sample(m, hand, d.samples.at(static_cast<std::size_t>(i))));
  return out;
}

LossSpec loss_spec(const PreparedSample& p) {
  LossSpec s;
  s.kind = p.sample->scene.kind;
  s.single_side = p.sample->scene.single_side;
  s.targets = &p.targets;
  s.body_shape = &p.sample->scene.body.shape;
  s.canonical = &p.canonical_keypoints;
  return s;
}

RawLoss raw_loss(const Models& m, const BodyLayout& layout, const Eigen::VectorXd& raw, const LossSpec& spec,
                 const LossWeights& w) {
  const Eigen::Index n = raw.size();
  VecX<Dual> rd(n);
  for (Eigen::Index i = 0; i < n; ++i) rd(i) = make_variable(raw(i), n, i);
  const PoseStateT<Dual> pred = decode_body_raw<Dual>(rd, layout);
  RawLoss out;
  const Dual l = sample_loss<Dual>(m, pred, spec, w, &out.terms);
  out.g_raw = l.derivatives().size() == n ? l.derivatives() : Eigen::VectorXd::Zero(n);
  if (!out.g_raw.allFinite()) throw Error(Errc::NonFiniteLoss, "gradient");
  return out;
}

LossTerms cham_loss(const Models& m, const Backbones& bb, const ChamParams& cham, const PreparedSample& p,
                    const LossWeights& w) {
  const ModulationStack mod = cham_forward(p.obs[0], p.obs[1], cham, m.grid);
  const BodyForward f = body_backbone_forward(bb.body, p.sample->body_tokens, &mod);
  LossTerms t;
  sample_loss<double>(m, f.pose, loss_spec(p), w, &t);
  return t;
}

ChamLossGrad cham_loss_grad(const Models& m, const Backbones& bb, const ChamParams& cham, const PreparedSample& p,
                            const LossWeights& w) {
  ChamTrace trace;
  const ModulationStack mod = cham_forward(p.obs[0], p.obs[1], cham, m.grid, &trace);
  const BodyForward f = body_backbone_forward(bb.body, p.sample->body_tokens, &mod);
  const RawLoss rl = raw_loss(m, bb.body.layout, f.raw, loss_spec(p), w);
  ChamLossGrad out;
  out.terms = rl.terms;
  if (!trace.detected[0] && !trace.detected[1]) {
    out.grad = zeros_like(cham);
    return out;
  }
  const Eigen::VectorXd g_pooled = body_head_backward(bb.body, rl.g_raw);
  const TokenNetGrad g = token_net_backward(bb.body.net, f.trace, g_pooled, false);
  out.grad = cham_backward(cham, trace, g.modulation);
  return out;
}

namespace {

struct HeadGrads {
  Eigen::MatrixXd pose_w, shape_w;
  Eigen::VectorXd pose_b, shape_b;

  explicit HeadGrads(const BodyBackbone& b)
      : pose_w(Eigen::MatrixXd::Zero(b.pose_w.rows(), b.pose_w.cols())),
        shape_w(Eigen::MatrixXd::Zero(b.shape_w.rows(), b.shape_w.cols())),
        pose_b(Eigen::VectorXd::Zero(b.pose_b.size())),
        shape_b(Eigen::VectorXd::Zero(b.shape_b.size())) {}
};

template <typename F>
void for_head_tensors(BodyBackbone& b, HeadGrads& g, F&& f) {
  f(b.pose_w, g.pose_w);
  f(b.pose_b, g.pose_b);
  f(b.shape_w, g.shape_w);
  f(b.shape_b, g.shape_b);
}

std::vector<Matrix3> corrupted_rotations(const Models& m, const SampleTargets& t, double sigma, std::mt19937_64& rng) {
  std::vector<Matrix3> r = t.rotations;
  std::normal_distribution<double> nd(0.0, sigma);
  for (const int j : m.rig.wrist) {
    Vector3 e;
    for (int c = 0; c < 3; ++c) e(c) = nd(rng);
    r[static_cast<std::size_t>(j)] = r[static_cast<std::size_t>(j)] * axis_angle_to_matrix<double>(e);
  }
  return r;
}

}  // namespace

BodyBackbone pretrain_body_backbone(const Config& cfg, const Models& m, const Dataset& d, PretrainReport* report) {
  BodyBackboneConfig bc;
  bc.depth = cfg.model.depth;
  bc.channels = cfg.model.channels;
  bc.grid_h = cfg.model.body_h;
  bc.grid_w = cfg.model.body_w;
  bc.hidden = cfg.model.body_hidden;
  bc.lift = cfg.model.lift;
  BodyLayout layout;
  layout.joints = m.body.joint_count();
  layout.shape_dim = m.body.shape_dim();
  BodyBackbone body = init_body_backbone(cfg.model.body_seed, bc, layout);
  const PretrainConfig& pc = cfg.pretrain;
  if (pc.epochs == 0 || d.train.empty()) {
    freeze(body);
    return body;
  }

  // Only the heads are trained, so pooled features are computed once per sample.
  struct Item {
    const Sample* sample;
    Eigen::VectorXd pooled;
    SampleTargets targets;
    std::vector<Matrix3> labels;
  };
  std::mt19937_64 label_rng(pc.seed ^ 0x77a1ULL);
  std::vector<Item> items;
  items.reserve(d.train.size());
  for (int i : d.train) {
    const Sample& s = d.samples.at(static_cast<std::size_t>(i));
    Item it{&s, body_backbone_forward(body, s.body_tokens, nullptr).trace.pooled, make_targets(m, s.scene), {}};
    it.labels = corrupted_rotations(m, it.targets, pc.wrist_label_noise, label_rng);
    items.push_back(std::move(it));
  }

  // Warm start: ridge regression of the raw head outputs onto the (corrupted) labels.
  {
    const auto n = static_cast<Eigen::Index>(items.size());
    Eigen::MatrixXd f(n, body.net.lift);
    Eigen::MatrixXd y(n, layout.size());
    for (Eigen::Index r = 0; r < n; ++r) {
      const Item& it = items[static_cast<std::size_t>(r)];
      PoseState label = it.sample->scene.body;
      label.root_orientation = it.labels[0];
      for (std::size_t j = 1; j < it.labels.size(); ++j) label.local_rotations[j - 1] = it.labels[j];
      f.row(r) = it.pooled.transpose();
      y.row(r) = encode_body_raw(label, layout).transpose();
    }
    Eigen::MatrixXd w;
    Eigen::VectorXd bias;
    ridge_fit(f, y, pc.body_ridge, w, bias);
    body.pose_w = w.topRows(layout.shape());
    body.pose_b = bias.head(layout.shape());
    body.shape_w = w.bottomRows(layout.shape_dim);
    body.shape_b = bias.tail(layout.shape_dim);
  }

  std::vector<int> body_rows(static_cast<std::size_t>(m.layout.body));
  std::iota(body_rows.begin(), body_rows.end(), 0);
  const LossWeights w;
  auto spec_of = [&](const Item& it) {
    LossSpec spec;
    spec.kind = SampleKind::FullBody;
    spec.targets = &it.targets;
    spec.body_shape = &it.sample->scene.body.shape;
    spec.rotations = &it.labels;
    spec.keypoint_rows = &body_rows;
    return spec;
  };
  int step = 0;
  auto evaluate_split = [&] {
    if (!report) return;
    double sum = 0.0;
    for (const Item& it : items) {
      sum += sample_loss<double>(m, decode_body_raw<double>(body_head(body, it.pooled), layout), spec_of(it), w, nullptr);
    }
    report->eval_steps.push_back(step);
    report->eval_loss.push_back(sum / static_cast<double>(items.size()));
  };
  evaluate_split();
  std::mt19937_64 rng(pc.seed);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < pc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(pc.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(pc.batch));
      HeadGrads g(body);
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const Item& it = items[order[k]];
        const RawLoss rl = raw_loss(m, body.layout, body_head(body, it.pooled), spec_of(it), w);
        loss += rl.terms.total;
        const Eigen::VectorXd gp = rl.g_raw.head(layout.shape());
        const Eigen::VectorXd gs = rl.g_raw.tail(layout.shape_dim);
        g.pose_w += gp * it.pooled.transpose();
        g.pose_b += gp;
        g.shape_w += gs * it.pooled.transpose();
        g.shape_b += gs;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for_head_tensors(body, g, [&](auto& p, const auto& gr) { p -= (pc.lr * scale) * gr; });
      if (report) report->step_loss.push_back(loss * scale);
      if (++step % pc.eval_every == 0) evaluate_split();
    }
  }
  if (step % pc.eval_every != 0) evaluate_split();
  freeze(body);
  return body;
}

HandBackbone calibrate_hand_backbone(const Config& cfg, const Dataset& d) {
  HandBackboneConfig hc;
  hc.channels = cfg.model.channels;
  hc.grid = cfg.model.hand_grid;
  hc.depth = cfg.model.hand_depth;
  hc.hidden = cfg.model.hand_hidden;
  hc.lift = cfg.model.lift;
  HandBackbone hand = init_hand_backbone(cfg.model.hand_seed, hc);
  std::vector<Eigen::VectorXd> feats;
  std::vector<Eigen::VectorXd> thetas;
  std::vector<Eigen::VectorXd> betas;
  for (int i : d.train) {
    const Sample& s = d.samples.at(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < 2; ++k) {
      if (!s.scene.detected[k]) continue;
      feats.push_back(hand_features(hand, s.hand_crops[k]));
      Eigen::VectorXd th(3 * kFingerJoints);
      for (int j = 0; j < kFingerJoints; ++j) th.segment<3>(3 * j) = s.scene.theta[k][static_cast<std::size_t>(j)];
      thetas.push_back(th);
      betas.push_back(s.scene.beta[k]);
    }
  }
  if (!feats.empty()) {
    const auto n = static_cast<Eigen::Index>(feats.size());
    Eigen::MatrixXd f(n, feats[0].size()), th(n, 3 * kFingerJoints), b(n, kHandShapeDim);
    for (Eigen::Index r = 0; r < n; ++r) {
      f.row(r) = feats[static_cast<std::size_t>(r)].transpose();
      th.row(r) = thetas[static_cast<std::size_t>(r)].transpose();
      b.row(r) = betas[static_cast<std::size_t>(r)].transpose();
    }
    calibrate_hand_heads(hand, f, th, b, cfg.pretrain.hand_ridge);
  }
  freeze(hand);
  return hand;
}

Backbones pretrain_backbones(const Config& cfg, const Models& m, const Dataset& d, PretrainReport* report) {
  Backbones bb;
  bb.hand = calibrate_hand_backbone(cfg, d);
  bb.body = pretrain_body_backbone(cfg, m, d, report);
  return bb;
}

namespace {

nlohmann::json terms_json(const LossTerms& t) {
  return {{"pose", t.pose}, {"wrist", t.wrist},     {"shape", t.shape},  {"kp3d", t.kp3d},
          {"kp2d", t.kp2d}, {"upright", t.upright}, {"total", t.total}};
}

void check_frozen(const Backbones& bb) {
  if (!bb.body.frozen || !bb.hand.frozen) throw Error(Errc::InvariantViolation, "backbones must be frozen");
  verify_frozen(bb.body);
  verify_frozen(bb.hand);
}

}  // namespace

ChamParams train_cham(const Config& cfg, const Models& m, const Backbones& bb, const std::vector<PreparedSample>& train,
                      ChamParams params, const TrainHooks& hooks, TrainReport* report) {
  check_frozen(bb);
  const TrainConfig& tc = cfg.train;
  if (tc.epochs > 0 && train.empty()) throw Error(Errc::EmptySplit, "train");
  std::mt19937_64 rng(tc.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const int decay_epoch = static_cast<int>(std::floor(tc.decay_at * tc.epochs + 1e-9));
  int step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = epoch >= decay_epoch ? tc.lr * tc.decay : tc.lr;
    std::shuffle(order.begin(), order.end(), rng);
    LossTerms epoch_terms;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch));
      ChamParams grad = zeros_like(params);
      LossTerms batch_terms;
      for (std::size_t k = start; k < end; ++k) {
        const ChamLossGrad r = cham_loss_grad(m, bb, params, train[order[k]], tc.weights);
        axpy(grad, 1.0, r.grad);
        batch_terms += r.terms;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      const Eigen::VectorXd gflat = flatten(grad) * scale;
      if (!gflat.allFinite()) throw Error(Errc::NonFiniteLoss, "gradient", step);
      axpy(params, -lr * scale, grad);
      epoch_terms += batch_terms;
      batch_terms *= scale;
      ++step;
      if (hooks.log) {
        const nlohmann::json rec = {{"step", step},
                                    {"epoch", epoch},
                                    {"lr", lr},
                                    {"batch", end - start},
                                    {"loss", terms_json(batch_terms)},
                                    {"grad_norm", gflat.norm()}};
        *hooks.log << rec.dump() << '\n';
      }
      if (hooks.checkpoint && tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0) hooks.checkpoint(step, params);
    }
    epoch_terms *= 1.0 / static_cast<double>(train.size());
    if (report) report->epoch_loss.push_back(epoch_terms.total);
    if (hooks.epoch_end) hooks.epoch_end(epoch, params);
  }
  check_frozen(bb);
  if (report) report->steps = step;
  return params;
}

ModelSpec hand_with_body_basis(const ModelSpec& hand, const ModelSpec& body, Side side) {
  const std::vector<int> ids = region_in_hand_order(body, side);
  if (static_cast<int>(ids.size()) != hand.vertex_count()) throw Error(Errc::CorrespondenceMissing, side_name(side));
  const Matrix3 rt = hand_region_rotation(side).transpose();
  ModelSpec out = hand;
  out.shape_basis.resize(3 * hand.vertex_count(), body.shape_dim());
  for (int v = 0; v < hand.vertex_count(); ++v) {
    out.shape_basis.middleRows(3 * v, 3) = rt * body.shape_basis.middleRows(3 * ids[static_cast<std::size_t>(v)], 3);
  }
  return out;
}

namespace {

// Rest-pose model points as base + basis * beta, rows in mm.
struct LinearModel {
  Points3d base;
  std::vector<Eigen::MatrixXd> basis;  // per point 3 x B

  Points3d eval(const Eigen::VectorXd& beta) const {
    Points3d p = base;
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) += (basis[static_cast<std::size_t>(i)] * beta).transpose();
    return p;
  }
};

LinearModel vertex_model(const ModelSpec& spec) {
  LinearModel lm;
  lm.base = spec.template_vertices * 1000.0;
  lm.basis.resize(static_cast<std::size_t>(spec.vertex_count()));
  for (int v = 0; v < spec.vertex_count(); ++v) lm.basis[static_cast<std::size_t>(v)] = spec.shape_basis.middleRows(3 * v, 3) * 1000.0;
  return lm;
}

LinearModel keypoint_model(const ModelSpec& spec, const LinearModel& verts) {
  LinearModel lm;
  lm.base = spec.joint_regressor * verts.base;
  lm.basis.assign(static_cast<std::size_t>(spec.joint_count()), Eigen::MatrixXd::Zero(3, spec.shape_dim()));
  for (int j = 0; j < spec.joint_count(); ++j) {
    for (int v = 0; v < spec.vertex_count(); ++v) {
      const double w = spec.joint_regressor(j, v);
      if (w != 0.0) lm.basis[static_cast<std::size_t>(j)] += w * verts.basis[static_cast<std::size_t>(v)];
    }
  }
  return lm;
}

Points3d gather_model_rows(const Points3d& v, const std::vector<int>& idx) {
  Points3d out(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = v.row(idx[i]);
  return out;
}

std::vector<int> nearest_rows(const Points3d& from, const Points3d& to) {
  std::vector<int> idx(static_cast<std::size_t>(from.rows()));
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    Eigen::Index best = 0;
    (to.rowwise() - from.row(i)).rowwise().squaredNorm().minCoeff(&best);
    idx[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return idx;
}

}  // namespace

ShapeFitResult fit_shape_to_target(const ModelSpec& spec, const ShapeTarget& target, const ShapeFitOptions& opt) {
  const bool nn = opt.nearest_neighbor || target.vertices.rows() != spec.vertex_count();
  if (target.keypoints.rows() != spec.joint_count()) throw Error(Errc::DimMismatch, "target keypoints");
  const LinearModel vm = vertex_model(spec);
  const LinearModel km = keypoint_model(spec, vm);
  const Points3d tv = target.vertices * 1000.0;
  const Points3d tk = target.keypoints * 1000.0;
  const Eigen::Index nb = spec.shape_dim();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(nb);
  Rigid t = kabsch_rigid(anchor_points(km.base), anchor_points(tk));
  std::vector<int> match;
  auto matched = [&](const Points3d& v) {
    if (!nn) return v;
    match = nearest_rows(tv, apply_rigid<double, double>(t, v));
    return gather_model_rows(v, match);
  };

  // Returns (objective, point error); accumulates dObjective/dbeta when asked.
  auto objective = [&](Eigen::VectorXd* g_beta) {
    const Points3d v = vm.eval(beta);
    const Points3d k = km.eval(beta);
    if (g_beta) g_beta->setZero(nb);
    const Eigen::Index np = nn ? tv.rows() : v.rows();
    if (nn && match.empty()) matched(v);
    double point = 0.0;
    for (Eigen::Index i = 0; i < np; ++i) {
      const Eigen::Index mi = nn ? match[static_cast<std::size_t>(i)] : i;
      const Vector3 res = t(v.row(mi).transpose()) - tv.row(i).transpose();
      const double dist = res.norm();
      point += dist;
      if (g_beta && dist > 0.0) {
        *g_beta += (opt.w_points / static_cast<double>(np)) * vm.basis[static_cast<std::size_t>(mi)].transpose() *
                   (t.rotation.transpose() * res / dist);
      }
    }
    point /= static_cast<double>(np);
    double key = 0.0;
    const double kw = opt.w_keypoints / (3.0 * static_cast<double>(k.rows()));
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      const Vector3 res = t(k.row(i).transpose()) - tk.row(i).transpose();
      key += res.lpNorm<1>();
      if (g_beta) {
        *g_beta += kw * km.basis[static_cast<std::size_t>(i)].transpose() *
                   (t.rotation.transpose() * res.array().sign().matrix());
      }
    }
    key /= 3.0 * static_cast<double>(k.rows());
    if (g_beta) *g_beta += 2.0 * opt.w_beta * beta;
    return std::array<double, 2>{opt.w_keypoints * key + opt.w_points * point + opt.w_beta * beta.squaredNorm(), point};
  };

  ShapeFitResult out;
  out.trace.push_back(objective(nullptr)[0]);
  Eigen::VectorXd gb;
  for (int it = 0; it < opt.iters; ++it) {
    objective(&gb);
    // Cosine step decay lets the non-smooth objective settle.
    const double decay = 0.5 * (1.0 + std::cos(std::numbers::pi * it / opt.iters));
    beta -= opt.lr_beta * decay * gb;
    // Rigid part re-solved in closed form on the current vertices.
    const Points3d v = vm.eval(beta);
    const Points3d src = matched(v);
    t = kabsch_rigid(src, tv);
    const double f = objective(nullptr)[0];
    if (!std::isfinite(f)) throw Error(Errc::NonFiniteLoss, "shape fit", it);
    out.trace.push_back(f);
  }
  out.point_error_mm = objective(nullptr)[1];
  out.beta = beta;
  out.transform = {t.rotation, t.translation / 1000.0};
  return out;
}

}  // namespace posefuse
