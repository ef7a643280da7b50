#include "posefuse/cham.hpp"

#include "posefuse/hash.hpp"
#include "posefuse/serialize.hpp"

#include <cmath>
#include <random>

namespace posefuse {

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double variance) {
  std::normal_distribution<double> nd(0.0, std::sqrt(variance));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
  return m;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    p.row(i) = (s.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

// One direction of one layer: queries from a, keys/values from b.
Eigen::MatrixXd attend(const AttentionLayer& l, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       AttentionCache* cache) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(a.cols()));
  Eigen::MatrixXd q = a * l.wq.transpose();
  Eigen::MatrixXd k = b * l.wk.transpose();
  Eigen::MatrixXd v = b * l.wv.transpose();
  Eigen::MatrixXd p = softmax_rows((q * k.transpose()) * scale);
  Eigen::MatrixXd o = p * v;
  Eigen::MatrixXd a1 = a + o * l.wo.transpose();
  Eigen::MatrixXd h = a1 * l.f1.transpose();
  h.rowwise() += l.fb1.transpose();
  h = h.array().tanh().matrix();
  Eigen::MatrixXd out = a1 + h * l.f2.transpose();
  out.rowwise() += l.fb2.transpose();
  if (cache) {
    cache->a = a;
    cache->b = b;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->p = std::move(p);
    cache->o = std::move(o);
    cache->a1 = std::move(a1);
    cache->h = std::move(h);
  }
  return out;
}

// Reverse of `attend`. Accumulates parameter gradients into gl and returns
// dL/da; dL/db is added to g_b.
Eigen::MatrixXd attend_backward(const AttentionLayer& l, const AttentionCache& c, const Eigen::MatrixXd& g_out,
                                AttentionLayer& gl, Eigen::MatrixXd& g_b) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.a.cols()));
  gl.f2 += g_out.transpose() * c.h;
  gl.fb2 += g_out.colwise().sum().transpose();
  const Eigen::MatrixXd g_hpre = (g_out * l.f2).cwiseProduct((1.0 - c.h.array().square()).matrix());
  gl.f1 += g_hpre.transpose() * c.a1;
  gl.fb1 += g_hpre.colwise().sum().transpose();
  const Eigen::MatrixXd g_a1 = g_out + g_hpre * l.f1;
  gl.wo += g_a1.transpose() * c.o;
  const Eigen::MatrixXd g_o = g_a1 * l.wo;
  const Eigen::MatrixXd g_p = g_o * c.v.transpose();
  const Eigen::MatrixXd g_v = c.p.transpose() * g_o;
  const Eigen::VectorXd row_dot = g_p.cwiseProduct(c.p).rowwise().sum();
  const Eigen::MatrixXd g_s = c.p.cwiseProduct(g_p.colwise() - row_dot) * scale;
  const Eigen::MatrixXd g_q = g_s * c.k;
  const Eigen::MatrixXd g_k = g_s.transpose() * c.q;
  gl.wq += g_q.transpose() * c.a;
  gl.wk += g_k.transpose() * c.b;
  gl.wv += g_v.transpose() * c.b;
  g_b += g_k * l.wk + g_v * l.wv;
  return g_a1 + g_q * l.wq;
}

}  // namespace

Eigen::Index ChamParams::parameter_count() const {
  Eigen::Index n = 0;
  visit([&](const auto& m) { n += m.size(); });
  return n;
}

ChamParams init_cham(std::uint64_t seed, int depth, int channels, int layers) {
  if (depth <= 0 || channels <= 0 || layers < 0) throw Error(Errc::InvalidDims, "cham");
  std::mt19937_64 rng(seed);
  ChamParams p;
  p.depth = depth;
  p.channels = channels;
  const int c = channels;
  const int f = channels;
  p.attention.resize(static_cast<std::size_t>(layers));
  for (auto& l : p.attention) {
    l.wq = gaussian(rng, c, c, 1.0 / c);
    l.wk = gaussian(rng, c, c, 1.0 / c);
    l.wv = gaussian(rng, c, c, 1.0 / c);
    l.wo = gaussian(rng, c, c, 0.25 / c);
    l.f1 = gaussian(rng, f, c, 1.0 / c);
    l.fb1 = Eigen::VectorXd::Zero(f);
    l.f2 = gaussian(rng, c, f, 0.25 / f);
    l.fb2 = Eigen::VectorXd::Zero(c);
  }
  for (auto& br : p.branch) {
    br.w.assign(static_cast<std::size_t>(depth), Eigen::MatrixXd::Zero(c, c));
    br.b.assign(static_cast<std::size_t>(depth), Eigen::VectorXd::Zero(c));
  }
  return p;
}

ChamParams zeros_like(const ChamParams& p) {
  ChamParams z = p;
  z.visit([](auto& m) { m.setZero(); });
  return z;
}

void axpy(ChamParams& a, double s, const ChamParams& b) {
  std::vector<const double*> src;
  std::vector<Eigen::Index> sizes;
  b.visit([&](const auto& m) {
    src.push_back(m.data());
    sizes.push_back(m.size());
  });
  std::size_t i = 0;
  a.visit([&](auto& m) {
    if (i >= src.size() || sizes[i] != m.size()) throw Error(Errc::DimMismatch, "cham params");
    m += s * Eigen::Map<const Eigen::MatrixXd>(src[i], m.rows(), m.cols());
    ++i;
  });
  if (i != src.size()) throw Error(Errc::DimMismatch, "cham params");
}

Eigen::VectorXd flatten(const ChamParams& p) {
  Eigen::VectorXd v(p.parameter_count());
  Eigen::Index o = 0;
  p.visit([&](const auto& m) {
    v.segment(o, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    o += m.size();
  });
  return v;
}

void unflatten(ChamParams& p, const Eigen::VectorXd& v) {
  if (v.size() != p.parameter_count()) throw Error(Errc::DimMismatch, "cham params");
  Eigen::Index o = 0;
  p.visit([&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = v.segment(o, m.size());
    o += m.size();
  });
}

std::uint64_t cham_hash(const ChamParams& p) {
  Fnv1a h;
  h.update_string("cham");
  h.update_value(static_cast<std::int64_t>(p.depth));
  h.update_value(static_cast<std::int64_t>(p.channels));
  h.update_value(static_cast<std::int64_t>(p.attention.size()));
  p.visit([&](const auto& m) { h.update_matrix(m); });
  return h.digest();
}

namespace {
constexpr const char* kChamMagic = "posefuse-cham-v1";
}

std::string serialize_cham(const ChamParams& p) {
  BlobWriter w;
  w.put_string(kChamMagic);
  w.put(static_cast<std::int32_t>(p.depth));
  w.put(static_cast<std::int32_t>(p.channels));
  w.put(static_cast<std::int32_t>(p.attention.size()));
  p.visit([&](const auto& m) { w.put_matrix(m); });
  w.put(cham_hash(p));
  return w.bytes();
}

ChamParams deserialize_cham(const std::string& bytes) {
  BlobReader r(bytes);
  if (r.get_string() != kChamMagic) throw Error(Errc::ParseError, "cham magic");
  const int depth = r.get<std::int32_t>();
  const int channels = r.get<std::int32_t>();
  const int layers = r.get<std::int32_t>();
  if (depth <= 0 || channels <= 0 || layers < 0 || depth > 1024 || channels > 4096 || layers > 64) {
    throw Error(Errc::ParseError, "cham dims");
  }
  ChamParams p = init_cham(0, depth, channels, layers);
  p.visit([&](auto& m) { r.get_matrix(m, "cham tensor"); });
  const auto h = r.get<std::uint64_t>();
  if (!r.done()) throw Error(Errc::ParseError, "trailing bytes");
  if (h != cham_hash(p)) throw Error(Errc::ParseError, "cham content hash");
  return p;
}

std::pair<TokenGrid, TokenGrid> cross_attention_encode(const TokenGrid& a, const TokenGrid& b, const ChamParams& params,
                                                       CrossAttentionTrace* trace) {
  if (!a.same_shape(b) || a.channels != params.channels) throw Error(Errc::DimMismatch, "cross attention");
  TokenGrid oa = a;
  TokenGrid ob = b;
  if (trace) trace->layers.assign(params.attention.size(), {});
  for (std::size_t i = 0; i < params.attention.size(); ++i) {
    const AttentionLayer& l = params.attention[i];
    Eigen::MatrixXd na = attend(l, oa.data, ob.data, trace ? &trace->layers[i][0] : nullptr);
    Eigen::MatrixXd nb = attend(l, ob.data, oa.data, trace ? &trace->layers[i][1] : nullptr);
    oa.data = std::move(na);
    ob.data = std::move(nb);
  }
  return {std::move(oa), std::move(ob)};
}

std::pair<TokenGrid, TokenGrid> build_condition(const HandObservation& left, const HandObservation& right,
                                                const ChamParams& params, double image_w, double image_h,
                                                CrossAttentionTrace* trace) {
  if (left.tokens.channels != params.channels || right.tokens.channels != params.channels) {
    throw Error(Errc::DimMismatch, "hand tokens");
  }
  if (!(left.detected && right.detected)) return {left.tokens, right.tokens};
  TokenGrid a = left.tokens;
  TokenGrid b = right.tokens;
  a.data += positional_encoding_2d(a.h, a.w, a.channels, a.affine, image_w, image_h).data;
  b.data += positional_encoding_2d(b.h, b.w, b.channels, b.affine, image_w, image_h).data;
  return cross_attention_encode(a, b, params, trace);
}

std::vector<TokenGrid> project_per_block(const BranchMaps& branch, const TokenGrid& feats) {
  std::vector<TokenGrid> out;
  out.reserve(branch.w.size());
  for (std::size_t k = 0; k < branch.w.size(); ++k) {
    if (branch.w[k].cols() != feats.channels || feats.data.cols() != feats.channels) {
      throw Error(Errc::DimMismatch, "branch map", static_cast<long>(k));
    }
    TokenGrid g(feats.h, feats.w, static_cast<int>(branch.w[k].rows()), feats.affine);
    g.data = feats.data * branch.w[k].transpose();
    g.data.rowwise() += branch.b[k].transpose();
    out.push_back(std::move(g));
  }
  return out;
}

TokenGrid realign_to_body(const TokenGrid& grid, int body_h, int body_w, const Affine2D& body_affine) {
  return resample_grid(grid, body_affine, body_h, body_w, 0.0);
}

ModulationStack merge_hands(const std::vector<TokenGrid>& left, const std::vector<TokenGrid>& right) {
  if (left.size() != right.size()) throw Error(Errc::DimMismatch, "stack depth");
  ModulationStack out;
  out.grids.reserve(left.size());
  for (std::size_t k = 0; k < left.size(); ++k) {
    if (!left[k].same_shape(right[k])) throw Error(Errc::DimMismatch, "stack grid", static_cast<long>(k));
    TokenGrid g = left[k];
    g.data = left[k].data.cwiseMax(right[k].data);
    out.grids.push_back(std::move(g));
  }
  return out;
}

ModulationStack cham_forward(const HandObservation& left, const HandObservation& right, const ChamParams& params,
                             const BodyGridGeometry& body, ChamTrace* trace) {
  ChamTrace local;
  ChamTrace& tr = trace ? *trace : local;
  tr = ChamTrace{};
  tr.attended = left.detected && right.detected;
  auto cond = build_condition(left, right, params, body.image_w, body.image_h, tr.attended ? &tr.attention : nullptr);
  tr.condition = {std::move(cond.first), std::move(cond.second)};
  const Eigen::Index cells = static_cast<Eigen::Index>(body.h) * body.w;
  const HandObservation* obs[2] = {&left, &right};
  for (int s = 0; s < 2; ++s) {
    auto& stack = tr.realigned[static_cast<std::size_t>(s)];
    stack.clear();
    tr.detected[static_cast<std::size_t>(s)] = obs[s]->detected;
    if (!obs[s]->detected) {
      stack.assign(static_cast<std::size_t>(params.depth), Eigen::MatrixXd::Zero(cells, params.channels));
      continue;
    }
    const TokenGrid& feats = tr.condition[static_cast<std::size_t>(s)];
    const std::vector<TokenGrid> projected = project_per_block(params.branch[static_cast<std::size_t>(s)], feats);
    tr.maps[static_cast<std::size_t>(s)].emplace_back(feats.h, feats.w, feats.affine, body.h, body.w, body.affine);
    const ResampleMap& map = tr.maps[static_cast<std::size_t>(s)].back();
    for (const auto& g : projected) stack.push_back(map.apply(g.data, 0.0));
  }
  ModulationStack out;
  out.grids.reserve(static_cast<std::size_t>(params.depth));
  for (int k = 0; k < params.depth; ++k) {
    TokenGrid g(body.h, body.w, params.channels, body.affine);
    g.data = tr.realigned[0][static_cast<std::size_t>(k)].cwiseMax(tr.realigned[1][static_cast<std::size_t>(k)]);
    out.grids.push_back(std::move(g));
  }
  return out;
}

ChamParams cham_backward(const ChamParams& params, const ChamTrace& trace,
                         const std::vector<Eigen::MatrixXd>& g_modulation) {
  if (static_cast<int>(g_modulation.size()) != params.depth) throw Error(Errc::DimMismatch, "modulation gradient");
  ChamParams g = zeros_like(params);
  std::array<Eigen::MatrixXd, 2> g_feats;
  for (int s = 0; s < 2; ++s) {
    const auto ss = static_cast<std::size_t>(s);
    if (!trace.detected[ss]) continue;
    const TokenGrid& feats = trace.condition[ss];
    const ResampleMap& map = trace.maps[ss].front();
    const auto& mine = trace.realigned[ss];
    const auto& other = trace.realigned[1 - ss];
    g_feats[ss] = Eigen::MatrixXd::Zero(feats.data.rows(), feats.data.cols());
    for (int k = 0; k < params.depth; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Eigen::MatrixXd& gm = g_modulation[ks];
      const Eigen::MatrixXd route =
          (mine[ks].array() > other[ks].array()).cast<double>() + 0.5 * (mine[ks].array() == other[ks].array()).cast<double>();
      const Eigen::MatrixXd g_body = gm.cwiseProduct(route);
      const Eigen::MatrixXd g_hand = map.apply_transpose(g_body);
      g.branch[ss].w[ks] += g_hand.transpose() * feats.data;
      g.branch[ss].b[ks] += g_hand.colwise().sum().transpose();
      g_feats[ss] += g_hand * params.branch[ss].w[ks];
    }
  }
  if (trace.attended) {
    Eigen::MatrixXd ga = g_feats[0];
    Eigen::MatrixXd gb = g_feats[1];
    for (std::size_t i = params.attention.size(); i-- > 0;) {
      const AttentionLayer& l = params.attention[i];
      AttentionLayer& gl = g.attention[i];
      const auto& caches = trace.attention.layers[i];
      // Direction 0 updated a from (a, b); direction 1 updated b from (b, a).
      Eigen::MatrixXd prev_ga = Eigen::MatrixXd::Zero(ga.rows(), ga.cols());
      Eigen::MatrixXd prev_gb = Eigen::MatrixXd::Zero(gb.rows(), gb.cols());
      prev_ga += attend_backward(l, caches[0], ga, gl, prev_gb);
      prev_gb += attend_backward(l, caches[1], gb, gl, prev_ga);
      ga = std::move(prev_ga);
      gb = std::move(prev_gb);
    }
  }
  return g;
}

}  // namespace posefuse
