#include "posefuse/backbones.hpp"

#include "posefuse/hash.hpp"
#include "posefuse/serialize.hpp"

#include <cmath>

namespace posefuse {

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double variance) {
  std::normal_distribution<double> nd(0.0, std::sqrt(variance));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
  return m;
}

Eigen::MatrixXd tanh_of(const Eigen::MatrixXd& m) { return m.array().tanh().matrix(); }

Eigen::MatrixXd tanh_slope(const Eigen::MatrixXd& t) { return (1.0 - t.array().square()).matrix(); }

void check_grid(const TokenGrid& g, int h, int w, int c, const char* what) {
  if (g.h != h || g.w != w || g.channels != c || g.data.rows() != static_cast<Eigen::Index>(h) * w ||
      g.data.cols() != c) {
    throw Error(Errc::DimMismatch, what);
  }
}

}  // namespace

TokenNet init_token_net(std::mt19937_64& rng, int h, int w, int channels, int depth, int hidden, int lift) {
  if (h <= 0 || w <= 0 || channels <= 0 || depth <= 0 || hidden <= 0 || lift <= 0) {
    throw Error(Errc::InvalidDims, "token net");
  }
  TokenNet net;
  net.h = h;
  net.w = w;
  net.channels = channels;
  net.hidden = hidden;
  net.lift = lift;
  const int n = h * w;
  net.blocks.resize(static_cast<std::size_t>(depth));
  for (auto& b : net.blocks) {
    b.mix = gaussian(rng, n, n, 0.01 / n);
    b.w1 = gaussian(rng, hidden, channels, 1.0 / channels);
    b.b1 = gaussian(rng, hidden, 1, 0.01);
    b.w2 = gaussian(rng, channels, hidden, 0.05 / hidden);
    b.b2 = Eigen::VectorXd::Zero(channels);
  }
  net.lift_w = gaussian(rng, lift, channels, 1.0 / channels);
  net.lift_b = gaussian(rng, lift, 1, 0.1);
  return net;
}

TokenNetTrace token_net_forward(const TokenNet& net, const Eigen::MatrixXd& x,
                                const std::vector<const Eigen::MatrixXd*>* modulation) {
  if (x.rows() != net.cells() || x.cols() != net.channels) throw Error(Errc::DimMismatch, "tokens");
  const int depth = net.depth();
  if (modulation && static_cast<int>(modulation->size()) != depth) throw Error(Errc::DimMismatch, "modulation depth");
  TokenNetTrace tr;
  tr.inputs.reserve(static_cast<std::size_t>(depth));
  tr.mixed.reserve(static_cast<std::size_t>(depth));
  tr.hidden.reserve(static_cast<std::size_t>(depth));
  tr.outputs.reserve(static_cast<std::size_t>(depth));
  Eigen::MatrixXd cur = x;
  for (int k = 0; k < depth; ++k) {
    const TokenBlock& b = net.blocks[static_cast<std::size_t>(k)];
    if (modulation) {
      const Eigen::MatrixXd* m = (*modulation)[static_cast<std::size_t>(k)];
      if (m) {
        if (m->rows() != cur.rows() || m->cols() != cur.cols()) throw Error(Errc::DimMismatch, "modulation", k);
        cur += *m;
      }
    }
    tr.inputs.push_back(cur);
    Eigen::MatrixXd t = tanh_of(b.mix * cur);
    Eigen::MatrixXd z = cur + t;
    Eigen::MatrixXd hid = z * b.w1.transpose();
    hid.rowwise() += b.b1.transpose();
    hid = tanh_of(hid);
    Eigen::MatrixXd out = z + hid * b.w2.transpose();
    out.rowwise() += b.b2.transpose();
    tr.mixed.push_back(std::move(t));
    tr.hidden.push_back(std::move(hid));
    tr.outputs.push_back(out);
    cur = std::move(out);
  }
  Eigen::MatrixXd f = cur * net.lift_w.transpose();
  f.rowwise() += net.lift_b.transpose();
  tr.features = tanh_of(f);
  tr.pooled = tr.features.colwise().mean().transpose();
  return tr;
}

TokenNetGrad token_net_backward(const TokenNet& net, const TokenNetTrace& trace, const Eigen::VectorXd& g_pooled,
                                bool lift_grads) {
  const int depth = net.depth();
  const Eigen::Index n = trace.features.rows();
  TokenNetGrad g;
  // Pooling spreads dL/dpooled evenly over the tokens.
  Eigen::MatrixXd g_pre = (Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)) * g_pooled.transpose())
                              .cwiseProduct(tanh_slope(trace.features));
  if (lift_grads) {
    g.lift_w = g_pre.transpose() * trace.outputs.back();
    g.lift_b = g_pre.colwise().sum().transpose();
  }
  Eigen::MatrixXd gx = g_pre * net.lift_w;
  g.modulation.resize(static_cast<std::size_t>(depth));
  for (int k = depth - 1; k >= 0; --k) {
    const auto ks = static_cast<std::size_t>(k);
    const TokenBlock& b = net.blocks[ks];
    const Eigen::MatrixXd g_hid = (gx * b.w2).cwiseProduct(tanh_slope(trace.hidden[ks]));
    const Eigen::MatrixXd gz = gx + g_hid * b.w1;
    gx = gz + b.mix.transpose() * gz.cwiseProduct(tanh_slope(trace.mixed[ks]));
    g.modulation[ks] = gx;
  }
  return g;
}

BodyBackbone init_body_backbone(std::uint64_t seed, const BodyBackboneConfig& cfg, const BodyLayout& layout) {
  std::mt19937_64 rng(seed);
  BodyBackbone p;
  p.layout = layout;
  p.net = init_token_net(rng, cfg.grid_h, cfg.grid_w, cfg.channels, cfg.depth, cfg.hidden, cfg.lift);
  const int pose_dim = layout.shape();
  p.pose_w = gaussian(rng, pose_dim, cfg.lift, 1e-4 / cfg.lift);
  p.pose_b = Eigen::VectorXd::Zero(pose_dim);
  p.shape_w = gaussian(rng, layout.shape_dim, cfg.lift, 1e-4 / cfg.lift);
  p.shape_b = Eigen::VectorXd::Zero(layout.shape_dim);
  return p;
}

Eigen::VectorXd encode_body_raw(const PoseState& pose, const BodyLayout& layout) {
  if (static_cast<int>(pose.local_rotations.size()) != layout.joints - 1 || pose.shape.size() != layout.shape_dim) {
    throw Error(Errc::DimMismatch, "pose for raw encoding");
  }
  auto unclamp = [](const Matrix3& r) -> Vector3 {
    const Vector3 u = matrix_to_axis_angle(r);
    const double n = u.norm();
    if (n < 1e-12) return u;
    const double a = kAxisAngleClamp;
    return u * (a * std::atanh(std::min(n / a, 1.0 - 1e-12)) / n);
  };
  Eigen::VectorXd raw(layout.size());
  raw.segment<3>(layout.root_aa()) = unclamp(pose.root_orientation);
  raw.segment<3>(layout.root_t()) = pose.root_translation - Vector3(0.0, 0.0, kRootDepthPrior);
  for (int j = 1; j < layout.joints; ++j) {
    raw.segment<3>(layout.local(j)) = unclamp(pose.local_rotations[static_cast<std::size_t>(j - 1)]);
  }
  raw.segment(layout.shape(), layout.shape_dim) = pose.shape;
  return raw;
}

Eigen::VectorXd body_head(const BodyBackbone& params, const Eigen::VectorXd& pooled) {
  Eigen::VectorXd raw(params.layout.size());
  raw.head(params.layout.shape()) = params.pose_w * pooled + params.pose_b;
  raw.tail(params.layout.shape_dim) = params.shape_w * pooled + params.shape_b;
  return raw;
}

Eigen::VectorXd body_head_backward(const BodyBackbone& params, const Eigen::VectorXd& g_raw) {
  return params.pose_w.transpose() * g_raw.head(params.layout.shape()) +
         params.shape_w.transpose() * g_raw.tail(params.layout.shape_dim);
}

BodyForward body_backbone_forward(const BodyBackbone& params, const TokenGrid& input, const ModulationStack* modulation) {
  const TokenNet& net = params.net;
  check_grid(input, net.h, net.w, net.channels, "body input");
  std::vector<const Eigen::MatrixXd*> mods;
  if (modulation) {
    if (static_cast<int>(modulation->grids.size()) != net.depth()) throw Error(Errc::DimMismatch, "modulation depth");
    for (const auto& g : modulation->grids) {
      check_grid(g, net.h, net.w, net.channels, "modulation grid");
      mods.push_back(&g.data);
    }
  }
  BodyForward out;
  out.trace = token_net_forward(net, input.data, modulation ? &mods : nullptr);
  out.raw = body_head(params, out.trace.pooled);
  out.pose = decode_body_raw<double>(out.raw, params.layout);
  return out;
}

HandBackbone init_hand_backbone(std::uint64_t seed, const HandBackboneConfig& cfg) {
  std::mt19937_64 rng(seed);
  HandBackbone p;
  p.net = init_token_net(rng, cfg.grid, cfg.grid, cfg.channels, cfg.depth, cfg.hidden, cfg.lift);
  p.theta_w = gaussian(rng, 3 * kFingerJoints, cfg.lift, 1e-4 / cfg.lift);
  p.theta_b = Eigen::VectorXd::Zero(3 * kFingerJoints);
  p.beta_w = gaussian(rng, kHandShapeDim, cfg.lift, 1e-4 / cfg.lift);
  p.beta_b = Eigen::VectorXd::Zero(kHandShapeDim);
  return p;
}

Eigen::VectorXd hand_features(const HandBackbone& params, const TokenGrid& crop) {
  check_grid(crop, params.net.h, params.net.w, params.net.channels, "hand crop");
  return token_net_forward(params.net, crop.data, nullptr).pooled;
}

HandObservation hand_backbone_forward(const HandBackbone& params, const TokenGrid& crop, Side side) {
  check_grid(crop, params.net.h, params.net.w, params.net.channels, "hand crop");
  TokenNetTrace tr = token_net_forward(params.net, crop.data, nullptr);
  HandObservation obs;
  obs.side = side;
  obs.detected = true;
  obs.crop_affine = crop.affine;
  obs.tokens = TokenGrid(crop.h, crop.w, crop.channels, crop.affine);
  obs.tokens.data = tr.outputs.back();
  const Eigen::VectorXd th = params.theta_w * tr.pooled + params.theta_b;
  obs.theta.resize(kFingerJoints);
  for (int j = 0; j < kFingerJoints; ++j) obs.theta[static_cast<std::size_t>(j)] = th.segment<3>(3 * j);
  obs.beta = params.beta_w * tr.pooled + params.beta_b;
  return obs;
}

HandObservation undetected_hand(const HandBackbone& params, Side side) {
  HandObservation obs;
  obs.side = side;
  obs.detected = false;
  obs.tokens = TokenGrid(params.net.h, params.net.w, params.net.channels, Affine2D{});
  return obs;
}

void ridge_fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& y, double ridge, Eigen::MatrixXd& w,
               Eigen::VectorXd& b) {
  const Eigen::Index n = features.rows();
  if (n == 0 || y.rows() != n) throw Error(Errc::DimMismatch, "ridge fit");
  // Centered; the intercept absorbs the means.
  const Eigen::RowVectorXd fmean = features.colwise().mean();
  const Eigen::MatrixXd fc = features.rowwise() - fmean;
  Eigen::MatrixXd gram = fc.transpose() * fc;
  gram.diagonal().array() += ridge * static_cast<double>(n);
  const Eigen::RowVectorXd ymean = y.colwise().mean();
  w = gram.ldlt().solve(fc.transpose() * (y.rowwise() - ymean)).transpose();
  b = (ymean - fmean * w.transpose()).transpose();
}

void calibrate_hand_heads(HandBackbone& params, const Eigen::MatrixXd& features, const Eigen::MatrixXd& theta,
                          const Eigen::MatrixXd& beta, double ridge) {
  const Eigen::Index n = features.rows();
  if (n == 0 || theta.rows() != n || beta.rows() != n || features.cols() != params.net.lift ||
      theta.cols() != 3 * kFingerJoints || beta.cols() != kHandShapeDim) {
    throw Error(Errc::DimMismatch, "hand calibration");
  }
  ridge_fit(features, theta, ridge, params.theta_w, params.theta_b);
  ridge_fit(features, beta, ridge, params.beta_w, params.beta_b);
}

namespace {

void hash_net(Fnv1a& h, const TokenNet& net) {
  h.update_value(static_cast<std::int64_t>(net.h));
  h.update_value(static_cast<std::int64_t>(net.w));
  h.update_value(static_cast<std::int64_t>(net.channels));
  h.update_value(static_cast<std::int64_t>(net.hidden));
  h.update_value(static_cast<std::int64_t>(net.lift));
  h.update_value(static_cast<std::int64_t>(net.depth()));
}

}  // namespace

template <>
std::uint64_t params_hash<BodyBackbone>(const BodyBackbone& p) {
  Fnv1a h;
  h.update_string("body");
  h.update_value(static_cast<std::int64_t>(p.layout.joints));
  h.update_value(static_cast<std::int64_t>(p.layout.shape_dim));
  hash_net(h, p.net);
  p.visit([&](const auto& m) { h.update_matrix(m); });
  return h.digest();
}

template <>
std::uint64_t params_hash<HandBackbone>(const HandBackbone& p) {
  Fnv1a h;
  h.update_string("hand");
  hash_net(h, p.net);
  p.visit([&](const auto& m) { h.update_matrix(m); });
  return h.digest();
}

void freeze(BodyBackbone& p) {
  p.frozen = true;
  p.hash = params_hash(p);
}

void freeze(HandBackbone& p) {
  p.frozen = true;
  p.hash = params_hash(p);
}

void verify_frozen(const BodyBackbone& p) {
  if (!p.frozen || params_hash(p) != p.hash) throw Error(Errc::FrozenParamsModified, "body backbone");
}

void verify_frozen(const HandBackbone& p) {
  if (!p.frozen || params_hash(p) != p.hash) throw Error(Errc::FrozenParamsModified, "hand backbone");
}

namespace {

constexpr const char* kBodyMagic = "posefuse-body-v1";
constexpr const char* kHandMagic = "posefuse-hand-v1";

void put_net_dims(BlobWriter& w, const TokenNet& net) {
  for (int v : {net.h, net.w, net.channels, net.hidden, net.lift, net.depth()}) w.put(static_cast<std::int32_t>(v));
}

TokenNet net_skeleton(BlobReader& r) {
  TokenNet net;
  net.h = r.get<std::int32_t>();
  net.w = r.get<std::int32_t>();
  net.channels = r.get<std::int32_t>();
  net.hidden = r.get<std::int32_t>();
  net.lift = r.get<std::int32_t>();
  const int depth = r.get<std::int32_t>();
  if (net.h <= 0 || net.w <= 0 || net.channels <= 0 || net.hidden <= 0 || net.lift <= 0 || depth <= 0 || depth > 1024) {
    throw Error(Errc::ParseError, "token net dims");
  }
  const int n = net.h * net.w;
  net.blocks.resize(static_cast<std::size_t>(depth));
  for (auto& b : net.blocks) {
    b.mix.resize(n, n);
    b.w1.resize(net.hidden, net.channels);
    b.b1.resize(net.hidden);
    b.w2.resize(net.channels, net.hidden);
    b.b2.resize(net.channels);
  }
  net.lift_w.resize(net.lift, net.channels);
  net.lift_b.resize(net.lift);
  return net;
}

template <typename P>
void read_tail(BlobReader& r, P& p) {
  p.visit([&](auto& m) { r.get_matrix(m, "parameter tensor"); });
  p.frozen = r.get<std::uint8_t>() != 0;
  p.hash = r.get<std::uint64_t>();
  const std::uint64_t content = r.get<std::uint64_t>();
  if (!r.done()) throw Error(Errc::ParseError, "trailing bytes");
  if (content != params_hash(p)) throw Error(Errc::FrozenParamsModified, "content hash");
  if (p.frozen && p.hash != content) throw Error(Errc::FrozenParamsModified, "frozen hash");
}

template <typename P>
void write_tail(BlobWriter& w, const P& p) {
  p.visit([&](const auto& m) { w.put_matrix(m); });
  w.put(static_cast<std::uint8_t>(p.frozen ? 1 : 0));
  w.put(p.hash);
  w.put(params_hash(p));
}

}  // namespace

std::string serialize_body_backbone(const BodyBackbone& p) {
  BlobWriter w;
  w.put_string(kBodyMagic);
  w.put(static_cast<std::int32_t>(p.layout.joints));
  w.put(static_cast<std::int32_t>(p.layout.shape_dim));
  put_net_dims(w, p.net);
  write_tail(w, p);
  return w.bytes();
}

BodyBackbone deserialize_body_backbone(const std::string& bytes) {
  BlobReader r(bytes);
  if (r.get_string() != kBodyMagic) throw Error(Errc::ParseError, "body backbone magic");
  BodyBackbone p;
  p.layout.joints = r.get<std::int32_t>();
  p.layout.shape_dim = r.get<std::int32_t>();
  if (p.layout.joints < 1 || p.layout.shape_dim < 0) throw Error(Errc::ParseError, "body layout");
  p.net = net_skeleton(r);
  p.pose_w.resize(p.layout.shape(), p.net.lift);
  p.pose_b.resize(p.layout.shape());
  p.shape_w.resize(p.layout.shape_dim, p.net.lift);
  p.shape_b.resize(p.layout.shape_dim);
  read_tail(r, p);
  return p;
}

std::string serialize_hand_backbone(const HandBackbone& p) {
  BlobWriter w;
  w.put_string(kHandMagic);
  put_net_dims(w, p.net);
  write_tail(w, p);
  return w.bytes();
}

HandBackbone deserialize_hand_backbone(const std::string& bytes) {
  BlobReader r(bytes);
  if (r.get_string() != kHandMagic) throw Error(Errc::ParseError, "hand backbone magic");
  HandBackbone p;
  p.net = net_skeleton(r);
  p.theta_w.resize(3 * kFingerJoints, p.net.lift);
  p.theta_b.resize(3 * kFingerJoints);
  p.beta_w.resize(kHandShapeDim, p.net.lift);
  p.beta_b.resize(kHandShapeDim);
  read_tail(r, p);
  return p;
}

}  // namespace posefuse
