#include "posefuse/dataset.hpp"

#include "posefuse/hash.hpp"
#include "posefuse/serialize.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

namespace posefuse {

namespace {

constexpr int kHandPoints = 21;  // 16 joints + 5 tips
constexpr const char* kManifestVersion = "posefuse-dataset-v1";

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vector3 normal3(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  const double x = nd(rng);
  const double y = nd(rng);
  const double z = nd(rng);
  return Vector3(x, y, z);
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Matrix3 small_rotation(std::mt19937_64& rng, double sigma) { return axis_angle_to_matrix<double>(normal3(rng, sigma)); }

// Fixed "renderer" embeddings: a function of the spec seed only.
struct Embeddings {
  Eigen::MatrixXd body;   // (22 + 2) x C
  Eigen::VectorXd body_depth;
  Eigen::MatrixXd hand;  // 21 x C
  Eigen::VectorXd hand_depth;
};

Embeddings make_embeddings(const Config& cfg, const Models& m) {
  std::mt19937_64 rng(mix_seed(cfg.data.spec_seed, 0xe3b));
  std::normal_distribution<double> nd(0.0, 1.0);
  const int c = cfg.model.channels;
  Embeddings e;
  auto fill = [&](Eigen::MatrixXd& mat, int rows) {
    mat.resize(rows, c);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < c; ++k) mat(i, k) = nd(rng);
  };
  fill(e.body, m.layout.body + 2);
  Eigen::MatrixXd d;
  fill(d, 1);
  e.body_depth = d.row(0).transpose();
  fill(e.hand, kHandPoints);
  fill(d, 1);
  e.hand_depth = d.row(0).transpose();
  return e;
}

// Gaussian splats of feature vectors at grid coordinates (cell units, centers at +0.5).
void splat(Eigen::MatrixXd& data, int h, int w, const Vec2<double>& g, const Eigen::VectorXd& value, double sigma) {
  const double r = 3.0 * sigma;
  const int c0 = std::max(0, static_cast<int>(std::floor(g.x() - r)));
  const int c1 = std::min(w - 1, static_cast<int>(std::ceil(g.x() + r)));
  const int r0 = std::max(0, static_cast<int>(std::floor(g.y() - r)));
  const int r1 = std::min(h - 1, static_cast<int>(std::ceil(g.y() + r)));
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      const double dx = col + 0.5 - g.x();
      const double dy = row + 0.5 - g.y();
      const double wt = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      data.row(static_cast<Eigen::Index>(row) * w + col) += wt * value.transpose();
    }
  }
}

void quantize(Eigen::MatrixXd& m) { m = m.cast<float>().cast<double>(); }

void add_noise(Eigen::MatrixXd& m, std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> nd(0.0, sigma);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) += nd(rng);
}

PoseState sample_body_pose(const Config& cfg, const Models& m, SampleKind kind, std::mt19937_64& rng) {
  PoseState p = zero_pose(m.body);
  p.root_orientation = rot_y(uniform(rng, -0.5, 0.5)) * rot_x(uniform(rng, -0.12, 0.12)) * rot_z(uniform(rng, -0.08, 0.08));
  p.root_translation = Vector3(uniform(rng, -0.25, 0.25), uniform(rng, -0.12, 0.12), 3.0 + uniform(rng, -0.3, 0.3));
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int j = 1; j < m.body.joint_count(); ++j) p.local_rotations[static_cast<std::size_t>(j - 1)] = small_rotation(rng, 0.08);
  auto set = [&](const char* name, const Matrix3& r) { p.local_rotations[static_cast<std::size_t>(m.body.joint(name) - 1)] = r; };
  const bool together = kind == SampleKind::InteractingHands;
  for (const Side side : kSides) {
    const double sgn = side == Side::Left ? 1.0 : -1.0;
    const std::string pre = side == Side::Left ? "left_" : "right_";
    const double down = uniform(rng, 0.2, 1.2);
    const double fwd = together ? uniform(rng, 0.7, 1.2) : uniform(rng, -0.3, 0.6);
    set((pre + "shoulder").c_str(), rot_z(sgn * down) * rot_y(sgn * fwd) * small_rotation(rng, 0.15));
    const double bend = together ? uniform(rng, 0.6, 1.4) : uniform(rng, 0.0, 1.2);
    set((pre + "elbow").c_str(), rot_y(sgn * bend) * small_rotation(rng, 0.15));
    set((pre + "wrist").c_str(), axis_angle_to_matrix<double>(normal3(rng, cfg.data.wrist_spread)));
  }
  for (const char* name : {"left_hip", "right_hip"}) set(name, small_rotation(rng, 0.2));
  for (const char* name : {"left_knee", "right_knee"}) set(name, small_rotation(rng, 0.2));
  p.shape = Eigen::VectorXd(m.body.shape_dim());
  for (Eigen::Index b = 0; b < p.shape.size(); ++b) p.shape(b) = 0.5 * nd(rng);
  return p;
}

std::vector<Vector3> sample_hand_pose(std::mt19937_64& rng) {
  std::vector<Vector3> theta(kFingerJoints);
  for (int f = 0; f < 5; ++f) {
    for (int k = 0; k < 3; ++k) {
      Vector3 aa = normal3(rng, f == 4 ? 0.2 : 0.08);
      if (f < 4) aa.z() -= uniform(rng, 0.0, 0.9);
      theta[static_cast<std::size_t>(3 * f + k)] = aa;
    }
  }
  return theta;
}

std::vector<SampleKind> kind_schedule(const std::array<double, 3>& mixture, int n, std::mt19937_64& rng) {
  const double total = mixture[0] + mixture[1] + mixture[2];
  std::array<int, 3> count{};
  std::array<double, 3> rem{};
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = n * mixture[static_cast<std::size_t>(k)] / total;
    count[static_cast<std::size_t>(k)] = static_cast<int>(std::floor(exact));
    rem[static_cast<std::size_t>(k)] = exact - count[static_cast<std::size_t>(k)];
    assigned += count[static_cast<std::size_t>(k)];
  }
  while (assigned < n) {
    const auto k = static_cast<std::size_t>(std::max_element(rem.begin(), rem.end()) - rem.begin());
    ++count[k];
    rem[k] = -1.0;
    ++assigned;
  }
  std::vector<SampleKind> kinds;
  for (int k = 0; k < 3; ++k) kinds.insert(kinds.end(), static_cast<std::size_t>(count[static_cast<std::size_t>(k)]), static_cast<SampleKind>(k));
  std::shuffle(kinds.begin(), kinds.end(), rng);
  return kinds;
}

}  // namespace

std::array<std::optional<HandEstimate>, 2> gt_hands(const Scene& scene) {
  std::array<std::optional<HandEstimate>, 2> h;
  for (std::size_t s = 0; s < 2; ++s) h[s] = HandEstimate{scene.theta[s], scene.beta[s]};
  return h;
}

SampleTargets make_targets(const Models& m, const Scene& scene) {
  SampleTargets t;
  t.gt = assemble(m, scene.body, gt_hands(scene));
  t.keypoints_2d = project_points<double>(m.camera, t.gt.keypoints);
  t.rotations = pose_rotations<double>(scene.body);
  for (const Side side : kSides) {
    t.wrist_global[static_cast<std::size_t>(side_index(side))] =
        global_orientation<double>(m.body.parents, scene.body, m.rig.wrist[static_cast<std::size_t>(side_index(side))]);
  }
  return t;
}

Affine2D crop_box(const Points2d& pixels, double padding, double image_w, double image_h, int grid) {
  const Eigen::Vector2d lo = pixels.colwise().minCoeff().transpose();
  const Eigen::Vector2d hi = pixels.colwise().maxCoeff().transpose();
  const Eigen::Vector2d center = 0.5 * (lo + hi);
  double side = (hi - lo).maxCoeff() * (1.0 + padding);
  side = std::clamp(side, 16.0, std::min(image_w, image_h));
  const double x0 = std::clamp(center.x() - side / 2.0, 0.0, image_w - side);
  const double y0 = std::clamp(center.y() - side / 2.0, 0.0, image_h - side);
  return Affine2D::scale_offset(side / grid, side / grid, x0, y0);
}

Matrix3 ray_rotation(const Camera& cam, const Vec2<double>& p) {
  const Vector3 ray = Vector3((p.x() - cam.principal.x()) / cam.focal.x(), (p.y() - cam.principal.y()) / cam.focal.y(), 1.0)
                          .normalized();
  const Vector3 z(0, 0, 1);
  const Vector3 axis = z.cross(ray);
  const double s = axis.norm();
  if (s < 1e-15) return Matrix3::Identity();
  return axis_angle_to_matrix<double>(axis / s * std::atan2(s, z.dot(ray)));
}

Sample generate_sample(const Config& cfg, const Models& m, std::uint64_t seed, std::uint32_t index, SampleKind kind) {
  std::mt19937_64 rng(mix_seed(seed, index));
  Sample out;
  out.index = index;
  Scene& sc = out.scene;
  sc.kind = kind;
  sc.body = sample_body_pose(cfg, m, kind, rng);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t s = 0; s < 2; ++s) {
    sc.theta[s] = sample_hand_pose(rng);
    sc.beta[s] = Eigen::VectorXd(m.hand.shape_dim());
    for (Eigen::Index b = 0; b < sc.beta[s].size(); ++b) sc.beta[s](b) = 0.8 * nd(rng);
  }
  if (kind == SampleKind::SingleHand) {
    sc.single_side = uniform(rng, 0.0, 1.0) < 0.5 ? Side::Left : Side::Right;
    sc.detected[static_cast<std::size_t>(side_index(sc.single_side))] = true;
  } else {
    for (std::size_t s = 0; s < 2; ++s) sc.detected[s] = uniform(rng, 0.0, 1.0) >= cfg.data.miss_rate;
  }
  sc.noise_seed = rng();

  const SampleTargets tg = make_targets(m, sc);
  const Embeddings emb = make_embeddings(cfg, m);
  std::mt19937_64 noise(sc.noise_seed);
  const int c = cfg.model.channels;

  // Body "image": joint splats with relative depth, a coarse hand blob, positional encoding.
  out.body_tokens = positional_encoding_2d(m.grid.h, m.grid.w, c, m.grid.affine, m.grid.image_w, m.grid.image_h);
  out.body_tokens.data *= 0.5;
  const Affine2D to_grid = m.grid.affine.inverse();
  const double z_pelvis = tg.gt.keypoints(m.layout.pelvis, 2);
  auto body_point = [&](const Vector3& p, const Vec2<double>& px, int e, double amp) {
    const Eigen::VectorXd v = amp * (emb.body.row(e).transpose() + emb.body_depth * ((p.z() - z_pelvis) / 0.2));
    splat(out.body_tokens.data, m.grid.h, m.grid.w, to_grid(px), v, 0.8);
  };
  for (int j = 0; j < m.layout.body; ++j) {
    body_point(tg.gt.keypoints.row(j).transpose(), tg.keypoints_2d.row(j).transpose(), j, 1.0);
  }
  for (const Side side : kSides) {
    const int r = m.layout.hand_offset(side) + kHandAnchorJoints[2];
    body_point(tg.gt.keypoints.row(r).transpose(), tg.keypoints_2d.row(r).transpose(), m.layout.body + side_index(side),
               cfg.data.body_hand_cue);
  }
  add_noise(out.body_tokens.data, noise, cfg.data.token_noise);
  quantize(out.body_tokens.data);

  const int g = cfg.model.hand_grid;
  for (const Side side : kSides) {
    const auto s = static_cast<std::size_t>(side_index(side));
    if (!sc.detected[s]) continue;
    Points3d pts(kHandPoints, 3);
    pts.topRows(m.layout.hand) = tg.gt.keypoints.middleRows(m.layout.hand_offset(side), m.layout.hand);
    pts.bottomRows(5) = hand_tip_points(m, tg.gt.mesh, side);
    const Points2d px = project_points<double>(m.camera, pts);
    sc.crop[s] = crop_box(px, cfg.data.crop_padding, cfg.model.image_w, cfg.model.image_h, g);
    const double side_px = sc.crop[s].a(0, 0) * g;
    // Oversampled hand feature map around the crop, then crop-and-resize onto the hand grid.
    const int n = 2 * g + g / 2;
    const double cell = side_px / (2.0 * g);
    TokenGrid hires(n, n, c,
                    Affine2D::scale_offset(cell, cell, sc.crop[s].a(0, 2) - cell * g / 4.0, sc.crop[s].a(1, 2) - cell * g / 4.0));
    const Affine2D hires_inv = hires.affine.inverse();
    const double z_wrist = pts(0, 2);
    for (int i = 0; i < kHandPoints; ++i) {
      const Eigen::VectorXd v = emb.hand.row(i).transpose() + emb.hand_depth * ((pts(i, 2) - z_wrist) / 0.05);
      splat(hires.data, n, n, hires_inv(px.row(i).transpose()), v, 1.2);
    }
    TokenGrid crop = resample_grid(hires, sc.crop[s], g, g, 0.0);
    add_noise(crop.data, noise, cfg.data.token_noise);
    quantize(crop.data);
    out.hand_crops[s] = std::move(crop);

    const Vec2<double> center = sc.crop[s](Vec2<double>(g / 2.0, g / 2.0));
    sc.stream_wrist[s] = ray_rotation(m.camera, center).transpose() * tg.wrist_global[s] *
                         axis_angle_to_matrix<double>(normal3(rng, cfg.data.hand_stream_noise));
  }
  return out;
}

Dataset generate_dataset(const Config& cfg, const Models& m, std::uint64_t seed) {
  Dataset d;
  d.seed = seed;
  d.body_spec_hash = spec_hash(m.body);
  d.hand_spec_hash = spec_hash(m.hand);
  std::mt19937_64 rng(mix_seed(seed, 0x5111));
  const std::vector<SampleKind> train_kinds = kind_schedule(cfg.data.mixture, cfg.data.train, rng);
  const std::vector<SampleKind> held_kinds = kind_schedule(cfg.data.mixture, cfg.data.heldout, rng);
  std::uint32_t index = 0;
  for (SampleKind k : train_kinds) {
    d.train.push_back(static_cast<int>(index));
    d.samples.push_back(generate_sample(cfg, m, seed, index++, k));
  }
  for (SampleKind k : held_kinds) {
    d.heldout.push_back(static_cast<int>(index));
    d.samples.push_back(generate_sample(cfg, m, seed, index++, k));
  }
  return d;
}

namespace {

// Token grids are stored as float32; generation already quantizes them.
void put_grid(BlobWriter& w, const TokenGrid& g) {
  w.put(static_cast<std::int32_t>(g.h));
  w.put(static_cast<std::int32_t>(g.w));
  w.put(static_cast<std::int32_t>(g.channels));
  for (int i = 0; i < 6; ++i) w.put(g.affine.a(i / 3, i % 3));
  for (Eigen::Index i = 0; i < g.data.rows(); ++i)
    for (Eigen::Index j = 0; j < g.data.cols(); ++j) w.put(static_cast<float>(g.data(i, j)));
}

TokenGrid get_grid(BlobReader& r) {
  const int h = r.get<std::int32_t>();
  const int w = r.get<std::int32_t>();
  const int c = r.get<std::int32_t>();
  if (h < 0 || w < 0 || c < 0 || h > 4096 || w > 4096 || c > 4096) throw Error(Errc::ParseError, "grid dims");
  Affine2D a;
  for (int i = 0; i < 6; ++i) a.a(i / 3, i % 3) = r.get<double>();
  TokenGrid g(h, w, c, a);
  for (Eigen::Index i = 0; i < g.data.rows(); ++i)
    for (Eigen::Index j = 0; j < g.data.cols(); ++j) g.data(i, j) = r.get<float>();
  return g;
}

void put_rot(BlobWriter& w, const Matrix3& r) {
  for (int i = 0; i < 9; ++i) w.put(r(i / 3, i % 3));
}

Matrix3 get_rot(BlobReader& r) {
  Matrix3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = r.get<double>();
  return m;
}

std::string encode_sample(const Sample& s) {
  BlobWriter w;
  const Scene& sc = s.scene;
  w.put(s.index);
  w.put(static_cast<std::uint8_t>(sc.kind));
  w.put(static_cast<std::uint8_t>(side_index(sc.single_side)));
  put_rot(w, sc.body.root_orientation);
  w.put_matrix(sc.body.root_translation);
  w.put(static_cast<std::int32_t>(sc.body.local_rotations.size()));
  for (const auto& r : sc.body.local_rotations) put_rot(w, r);
  w.put_matrix(sc.body.shape);
  for (std::size_t k = 0; k < 2; ++k) {
    w.put(static_cast<std::uint8_t>(sc.detected[k] ? 1 : 0));
    w.put(static_cast<std::int32_t>(sc.theta[k].size()));
    for (const auto& t : sc.theta[k]) w.put_matrix(t);
    w.put_matrix(sc.beta[k]);
    for (int i = 0; i < 6; ++i) w.put(sc.crop[k].a(i / 3, i % 3));
    put_rot(w, sc.stream_wrist[k]);
  }
  w.put(sc.noise_seed);
  put_grid(w, s.body_tokens);
  for (std::size_t k = 0; k < 2; ++k) put_grid(w, s.hand_crops[k]);
  return w.bytes();
}

template <typename V>
void get_vector(BlobReader& r, V& v, const char* field) {
  const auto rows = r.get<std::int64_t>();
  const auto cols = r.get<std::int64_t>();
  if (cols != 1 || rows < 0 || rows > 1 << 20) throw Error(Errc::ParseError, field);
  v.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) v(i) = r.get<double>();
}

Sample decode_sample(const std::string& bytes) {
  BlobReader r(bytes);
  Sample s;
  Scene& sc = s.scene;
  s.index = r.get<std::uint32_t>();
  const auto kind = r.get<std::uint8_t>();
  if (kind > 2) throw Error(Errc::ParseError, "sample kind");
  sc.kind = static_cast<SampleKind>(kind);
  const auto side = r.get<std::uint8_t>();
  if (side > 1) throw Error(Errc::ParseError, "sample side");
  sc.single_side = static_cast<Side>(side);
  sc.body.root_orientation = get_rot(r);
  get_vector(r, sc.body.root_translation, "root_translation");
  const int nl = r.get<std::int32_t>();
  if (nl < 0 || nl > 1024) throw Error(Errc::ParseError, "local rotations");
  sc.body.local_rotations.resize(static_cast<std::size_t>(nl));
  for (auto& rot : sc.body.local_rotations) rot = get_rot(r);
  get_vector(r, sc.body.shape, "shape");
  for (std::size_t k = 0; k < 2; ++k) {
    sc.detected[k] = r.get<std::uint8_t>() != 0;
    const int nt = r.get<std::int32_t>();
    if (nt < 0 || nt > 1024) throw Error(Errc::ParseError, "theta");
    sc.theta[k].resize(static_cast<std::size_t>(nt));
    for (auto& t : sc.theta[k]) get_vector(r, t, "theta");
    get_vector(r, sc.beta[k], "beta");
    for (int i = 0; i < 6; ++i) sc.crop[k].a(i / 3, i % 3) = r.get<double>();
    sc.stream_wrist[k] = get_rot(r);
  }
  sc.noise_seed = r.get<std::uint64_t>();
  s.body_tokens = get_grid(r);
  for (std::size_t k = 0; k < 2; ++k) s.hand_crops[k] = get_grid(r);
  if (!r.done()) throw Error(Errc::ParseError, "sample trailing bytes");
  return s;
}

}  // namespace

void save_dataset(const Dataset& d, const Config& cfg, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, dir);
  std::string blob;
  nlohmann::json samples = nlohmann::json::array();
  for (const Sample& s : d.samples) {
    const std::string rec = encode_sample(s);
    samples.push_back({{"index", s.index},
                       {"kind", sample_kind_name(s.scene.kind)},
                       {"offset", blob.size()},
                       {"bytes", rec.size()}});
    blob += rec;
  }
  nlohmann::json man;
  man["version"] = kManifestVersion;
  man["seed"] = d.seed;
  man["body_spec_hash"] = hash_hex(d.body_spec_hash);
  man["hand_spec_hash"] = hash_hex(d.hand_spec_hash);
  man["sample_count"] = d.samples.size();
  man["splits"] = {{"train", d.train}, {"heldout", d.heldout}};
  man["samples_sha"] = hash_hex([&] {
    Fnv1a h;
    h.update(blob.data(), blob.size());
    return h.digest();
  }());
  man["config"] = nlohmann::json::parse(config_to_json(cfg));
  man["samples"] = samples;
  write_file(dir + "/samples.bin", blob);
  write_file(dir + "/manifest.json", man.dump(1) + "\n");
}

Dataset load_dataset(const std::string& dir, const Models& m) {
  nlohmann::json man;
  try {
    man = nlohmann::json::parse(read_file(dir + "/manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("manifest: ") + e.what());
  }
  const std::string blob = read_file(dir + "/samples.bin");
  Dataset d;
  try {
    if (man.at("version").get<std::string>() != kManifestVersion) throw Error(Errc::ParseError, "manifest version");
    if (man.at("body_spec_hash").get<std::string>() != hash_hex(spec_hash(m.body)) ||
        man.at("hand_spec_hash").get<std::string>() != hash_hex(spec_hash(m.hand))) {
      throw Error(Errc::InvariantViolation, "spec hashes");
    }
    Fnv1a h;
    h.update(blob.data(), blob.size());
    if (man.at("samples_sha").get<std::string>() != hash_hex(h.digest())) throw Error(Errc::ParseError, "samples.bin checksum");
    d.seed = man.at("seed").get<std::uint64_t>();
    d.body_spec_hash = spec_hash(m.body);
    d.hand_spec_hash = spec_hash(m.hand);
    d.train = man.at("splits").at("train").get<std::vector<int>>();
    d.heldout = man.at("splits").at("heldout").get<std::vector<int>>();
    for (const auto& rec : man.at("samples")) {
      const auto off = rec.at("offset").get<std::size_t>();
      const auto len = rec.at("bytes").get<std::size_t>();
      if (off + len > blob.size()) throw Error(Errc::ParseError, "sample offset");
      d.samples.push_back(decode_sample(blob.substr(off, len)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("manifest: ") + e.what());
  }
  std::vector<char> seen(d.samples.size(), 0);
  for (const auto* split : {&d.train, &d.heldout}) {
    for (int i : *split) {
      if (i < 0 || static_cast<std::size_t>(i) >= d.samples.size() || seen[static_cast<std::size_t>(i)]) {
        throw Error(Errc::ParseError, "split indices");
      }
      seen[static_cast<std::size_t>(i)] = 1;
    }
  }
  return d;
}

}  // namespace posefuse
