#include "posefuse/toy_models.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <utility>

namespace posefuse {

namespace {

using Weights = std::vector<std::pair<int, double>>;

// Vertex annotations used only while authoring the shape basis.
struct VertexInfo {
  int part = 0;
  Vector3 center = Vector3::Zero();
  bool ring = true;
  double frac = 1.0;  // part-specific station parameter
};

struct Builder {
  std::vector<Vector3> verts;
  std::vector<Weights> skin;
  std::vector<VertexInfo> info;
  std::vector<Eigen::Vector3i> faces;

  std::vector<int> ring(const Vector3& c, const Vector3& dir, const Vector3& ref, int k, double ra, double rb,
                        const Weights& w, VertexInfo vi) {
    const Vector3 d = dir.normalized();
    const Vector3 u = (ref - ref.dot(d) * d).normalized();
    const Vector3 v = d.cross(u);
    std::vector<int> ids;
    vi.center = c;
    vi.ring = true;
    for (int i = 0; i < k; ++i) {
      const double phi = 2.0 * std::numbers::pi * i / k;
      ids.push_back(add(c + ra * std::cos(phi) * u + rb * std::sin(phi) * v, w, vi));
    }
    return ids;
  }

  int point(const Vector3& p, const Weights& w, VertexInfo vi) {
    vi.center = p;
    vi.ring = false;
    return add(p, w, vi);
  }

  int add(const Vector3& p, const Weights& w, const VertexInfo& vi) {
    verts.push_back(p);
    skin.push_back(w);
    info.push_back(vi);
    return static_cast<int>(verts.size()) - 1;
  }

  // b lies further along the tube direction than a.
  void connect(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t k = a.size();
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t n = (i + 1) % k;
      faces.emplace_back(a[i], b[n], b[i]);
      faces.emplace_back(a[i], a[n], b[n]);
    }
  }

  void cap_end(const std::vector<int>& ring_ids, int tip) {
    for (std::size_t i = 0; i < ring_ids.size(); ++i) {
      faces.emplace_back(ring_ids[i], ring_ids[(i + 1) % ring_ids.size()], tip);
    }
  }

  void cap_start(int tip, const std::vector<int>& ring_ids) {
    for (std::size_t i = 0; i < ring_ids.size(); ++i) {
      faces.emplace_back(tip, ring_ids[(i + 1) % ring_ids.size()], ring_ids[i]);
    }
  }
};

Weights at_joint(int parent, int j) {
  if (parent < 0) return {{j, 1.0}};
  return {{parent, 0.5}, {j, 0.5}};
}

Weights only(int j) { return {{j, 1.0}}; }

Eigen::RowVectorXd ring_average(int vertex_count, const std::vector<int>& ids) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(vertex_count);
  for (int id : ids) row(id) += 1.0 / static_cast<double>(ids.size());
  return row;
}

Vector3 lerp(const Vector3& a, const Vector3& b, double t) { return a + t * (b - a); }

void add_jitter(std::vector<Vector3>& verts, std::uint64_t seed, std::uint64_t tag) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + tag);
  std::normal_distribution<double> n(0.0, 0.0002);
  for (auto& v : verts)
    for (int c = 0; c < 3; ++c) v(c) += n(rng);
}

// ---------------------------------------------------------------- hand

const std::array<const char*, 16> kHandJointNames = {
    "wrist",      "index_mcp",  "index_pip", "index_dip", "middle_mcp", "middle_pip",
    "middle_dip", "pinky_mcp",  "pinky_pip", "pinky_dip", "ring_mcp",   "ring_pip",
    "ring_dip",   "thumb_cmc",  "thumb_mcp", "thumb_ip"};

// Per finger (index, middle, pinky, ring, thumb): three joints and the tip.
// Fingers point along +x, thumb toward +z, palm faces -y.
const std::array<std::array<Vector3, 4>, 5> kFingerPoints = {{
    {Vector3(0.088, 0.0, 0.024), Vector3(0.128, 0.0, 0.026), Vector3(0.152, 0.0, 0.027), Vector3(0.172, 0.0, 0.028)},
    {Vector3(0.090, 0.0, 0.004), Vector3(0.134, 0.0, 0.004), Vector3(0.162, 0.0, 0.004), Vector3(0.184, 0.0, 0.004)},
    {Vector3(0.076, 0.0, -0.034), Vector3(0.108, 0.0, -0.038), Vector3(0.128, 0.0, -0.040),
     Vector3(0.146, 0.0, -0.042)},
    {Vector3(0.084, 0.0, -0.015), Vector3(0.124, 0.0, -0.017), Vector3(0.150, 0.0, -0.018),
     Vector3(0.171, 0.0, -0.019)},
    {Vector3(0.024, -0.012, 0.030), Vector3(0.052, -0.018, 0.058), Vector3(0.078, -0.020, 0.074),
     Vector3(0.098, -0.021, 0.086)},
}};

constexpr int kPalmRings = 6;
constexpr int kPalmK = 12;
constexpr int kFingerRings = 8;
constexpr int kFingerK = 8;

struct HandBuild {
  Builder b;
  std::vector<std::vector<int>> joint_rings;  // ring ids per joint
  std::array<int, 5> tips{};
};

HandBuild build_hand() {
  HandBuild hb;
  Builder& b = hb.b;
  hb.joint_rings.resize(16);
  const Vector3 ex(1, 0, 0), ey(0, 1, 0), ez(0, 0, 1);

  std::vector<int> prev;
  for (int k = 0; k < kPalmRings; ++k) {
    const double t = static_cast<double>(k) / (kPalmRings - 1);
    VertexInfo vi;
    vi.part = 0;
    auto ids = b.ring(Vector3(0.016 * k, 0, 0), ex, ez, kPalmK, 0.032 + 0.014 * t, 0.013 + 0.003 * t, only(0), vi);
    if (k == 0) hb.joint_rings[0] = ids;
    if (!prev.empty()) b.connect(prev, ids);
    prev = ids;
  }
  VertexInfo cap_info;
  cap_info.part = 0;
  b.cap_end(prev, b.point(Vector3(0.088, 0, 0), only(0), cap_info));

  for (int f = 0; f < 5; ++f) {
    const auto& p = kFingerPoints[static_cast<std::size_t>(f)];
    const int m = 1 + 3 * f;
    const double r0 = f == 4 ? 0.0105 : 0.0085;
    const std::array<Vector3, kFingerRings> centers = {
        p[0], lerp(p[0], p[1], 0.5), p[1], lerp(p[1], p[2], 0.5), p[2],
        lerp(p[2], p[3], 1.0 / 3.0), lerp(p[2], p[3], 2.0 / 3.0), lerp(p[2], p[3], 0.9)};
    const std::array<Weights, kFingerRings> weights = {at_joint(0, m), only(m),     at_joint(m, m + 1),
                                                       only(m + 1),    at_joint(m + 1, m + 2),
                                                       only(m + 2),    only(m + 2), only(m + 2)};
    prev.clear();
    for (int k = 0; k < kFingerRings; ++k) {
      Vector3 dir;
      if (k == 0) {
        dir = p[1] - p[0];
      } else if (k == 2) {
        dir = (p[1] - p[0]).normalized() + (p[2] - p[1]).normalized();
      } else if (k == 4) {
        dir = (p[2] - p[1]).normalized() + (p[3] - p[2]).normalized();
      } else if (k < 2) {
        dir = p[1] - p[0];
      } else if (k < 4) {
        dir = p[2] - p[1];
      } else {
        dir = p[3] - p[2];
      }
      VertexInfo vi;
      vi.part = 1 + f;
      const double r = r0 * (1.0 - 0.25 * k / (kFingerRings - 1));
      auto ids = b.ring(centers[static_cast<std::size_t>(k)], dir, ey, kFingerK, r, r,
                        weights[static_cast<std::size_t>(k)], vi);
      if (k == 0) hb.joint_rings[static_cast<std::size_t>(m)] = ids;
      if (k == 2) hb.joint_rings[static_cast<std::size_t>(m + 1)] = ids;
      if (k == 4) hb.joint_rings[static_cast<std::size_t>(m + 2)] = ids;
      if (!prev.empty()) b.connect(prev, ids);
      prev = ids;
    }
    VertexInfo tip_info;
    tip_info.part = 1 + f;
    const int tip = b.point(p[3], only(m + 2), tip_info);
    b.cap_end(prev, tip);
    hb.tips[static_cast<std::size_t>(f)] = tip;
  }
  return hb;
}

Eigen::MatrixXd hand_shape_basis(const Builder& b) {
  const int nv = static_cast<int>(b.verts.size());
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * nv, 10);
  // finger (index, middle, pinky, ring, thumb) -> length component
  const std::array<int, 5> length_comp = {6, 7, 9, 8, 5};
  const std::array<double, 5> arch = {0.6, 1.0, 0.2, 0.7, 0.0};
  for (int v = 0; v < nv; ++v) {
    const VertexInfo& vi = b.info[static_cast<std::size_t>(v)];
    const Vector3& p = b.verts[static_cast<std::size_t>(v)];
    auto set = [&](int comp, const Vector3& d) { basis.block(3 * v, comp, 3, 1) = d; };
    set(0, 0.1 * p);
    if (vi.part == 0) {
      set(1, Vector3(0, 0, 0.15 * p.z()));
      set(4, Vector3(0, 0.2 * p.y(), 0));
      continue;
    }
    const int f = vi.part - 1;
    const Vector3& base = kFingerPoints[static_cast<std::size_t>(f)][0];
    set(1, Vector3(0, 0, 0.15 * base.z()));
    set(2, Vector3(0, 0.01 * arch[static_cast<std::size_t>(f)], 0));
    if (vi.ring) set(3, 0.15 * (p - vi.center));
    set(length_comp[static_cast<std::size_t>(f)], 0.15 * (vi.center - base));
  }
  return basis;
}

Faces to_faces(const std::vector<Eigen::Vector3i>& f) {
  Faces out(static_cast<Eigen::Index>(f.size()), 3);
  for (std::size_t i = 0; i < f.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = f[i].transpose();
  return out;
}

Points3d to_points(const std::vector<Vector3>& v) {
  Points3d out(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return out;
}

Eigen::MatrixXd skin_matrix(const std::vector<Weights>& skin, int nj) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(skin.size()), nj);
  for (std::size_t v = 0; v < skin.size(); ++v)
    for (const auto& [j, x] : skin[v]) w(static_cast<Eigen::Index>(v), j) += x;
  return w;
}

ModelSpec make_hand_spec(std::uint64_t seed) {
  HandBuild hb = build_hand();
  Builder& b = hb.b;
  ModelSpec spec;
  spec.kind = ModelKind::Hand;
  spec.parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14};
  const Eigen::MatrixXd basis = hand_shape_basis(b);
  std::vector<Vector3> verts = b.verts;
  add_jitter(verts, seed, 0x68616e64ULL);
  spec.template_vertices = to_points(verts);
  spec.faces = to_faces(b.faces);
  const int nv = static_cast<int>(verts.size());
  spec.joint_regressor.resize(16, nv);
  for (int j = 0; j < 16; ++j) spec.joint_regressor.row(j) = ring_average(nv, hb.joint_rings[static_cast<std::size_t>(j)]);
  spec.skinning_weights = skin_matrix(b.skin, 16);
  spec.shape_basis = basis;
  for (int j = 0; j < 16; ++j) spec.named_joints[kHandJointNames[static_cast<std::size_t>(j)]] = j;
  return spec;
}

// ---------------------------------------------------------------- body

enum BodyJoint {
  kPelvis, kSpine1, kSpine2, kSpine3, kNeck, kHead,
  kLCollar, kLShoulder, kLElbow, kLWrist,
  kRCollar, kRShoulder, kRElbow, kRWrist,
  kLHip, kLKnee, kLAnkle, kLFoot,
  kRHip, kRKnee, kRAnkle, kRFoot,
};

const std::array<const char*, 22> kBodyJointNames = {
    "pelvis",         "spine1",        "spine2",         "spine3",      "neck",        "head",
    "left_collar",    "left_shoulder", "left_elbow",     "left_wrist",  "right_collar", "right_shoulder",
    "right_elbow",    "right_wrist",   "left_hip",       "left_knee",   "left_ankle",  "left_foot",
    "right_hip",      "right_knee",    "right_ankle",    "right_foot"};

const std::vector<int> kBodyParents = {-1, 0, 1, 2, 3, 4, 3, 6, 7, 8, 3, 10, 11, 12, 0, 14, 15, 16, 0, 18, 19, 20};

// Authored Y-up, facing +z, subject's left toward +x; pelvis at the origin.
std::array<Vector3, 22> body_joint_positions() {
  std::array<Vector3, 22> p;
  p[kPelvis] = Vector3(0, 0, 0);
  p[kSpine1] = Vector3(0, 0.10, -0.01);
  p[kSpine2] = Vector3(0, 0.22, -0.01);
  p[kSpine3] = Vector3(0, 0.34, 0.0);
  p[kNeck] = Vector3(0, 0.50, -0.01);
  p[kHead] = Vector3(0, 0.60, 0.01);
  const std::array<Vector3, 4> arm = {Vector3(0.03, 0.44, 0.0), Vector3(0.17, 0.44, -0.01), Vector3(0.43, 0.44, -0.02),
                                      Vector3(0.68, 0.44, 0.0)};
  const std::array<Vector3, 4> leg = {Vector3(0.09, -0.05, 0.0), Vector3(0.10, -0.47, 0.01),
                                      Vector3(0.10, -0.88, -0.02), Vector3(0.10, -0.94, 0.10)};
  for (int i = 0; i < 4; ++i) {
    p[static_cast<std::size_t>(kLCollar + i)] = arm[static_cast<std::size_t>(i)];
    p[static_cast<std::size_t>(kRCollar + i)] = arm[static_cast<std::size_t>(i)].cwiseProduct(Vector3(-1, 1, 1));
    p[static_cast<std::size_t>(kLHip + i)] = leg[static_cast<std::size_t>(i)];
    p[static_cast<std::size_t>(kRHip + i)] = leg[static_cast<std::size_t>(i)].cwiseProduct(Vector3(-1, 1, 1));
  }
  return p;
}

enum BodyPart { kTorso, kHeadPart, kArmL, kArmR, kLegL, kLegR, kHandL, kHandR };

struct Station {
  Vector3 c;
  Vector3 d;
  double ra, rb;
  Weights w;
  double frac;
};

// Stations along joints[0] -> ... with `between` rings per segment.
std::vector<Station> chain_stations(const std::array<Vector3, 22>& jp, const std::vector<int>& joints,
                                    const std::vector<int>& between, const std::vector<double>& ra,
                                    const std::vector<double>& rb) {
  std::vector<Station> out;
  for (std::size_t s = 0; s + 1 < joints.size(); ++s) {
    const int a = joints[s];
    const int bj = joints[s + 1];
    const Vector3 d = (jp[static_cast<std::size_t>(bj)] - jp[static_cast<std::size_t>(a)]).normalized();
    Vector3 da = d;
    if (s > 0) da = (d + (jp[static_cast<std::size_t>(a)] - jp[static_cast<std::size_t>(joints[s - 1])]).normalized());
    out.push_back({jp[static_cast<std::size_t>(a)], da, ra[s], rb[s], at_joint(kBodyParents[static_cast<std::size_t>(a)], a),
                   static_cast<double>(s)});
    const int nb = between[s];
    for (int i = 1; i <= nb; ++i) {
      const double t = static_cast<double>(i) / (nb + 1);
      out.push_back({lerp(jp[static_cast<std::size_t>(a)], jp[static_cast<std::size_t>(bj)], t), d,
                     ra[s] + t * (ra[s + 1] - ra[s]), rb[s] + t * (rb[s + 1] - rb[s]), only(a),
                     static_cast<double>(s) + t});
    }
  }
  const int last = joints.back();
  const Vector3 d = (jp[static_cast<std::size_t>(last)] - jp[static_cast<std::size_t>(joints[joints.size() - 2])]).normalized();
  out.push_back({jp[static_cast<std::size_t>(last)], d, ra.back(), rb.back(),
                 at_joint(kBodyParents[static_cast<std::size_t>(last)], last),
                 static_cast<double>(joints.size() - 1)});
  return out;
}

struct BodyBuild {
  Builder b;
  std::vector<std::vector<int>> joint_rings;
  std::array<std::vector<int>, 2> hand_ids;  // body ids of hand vertices, in hand-vertex order
  std::array<std::vector<int>, 2> palm_ring;
};

std::vector<std::vector<int>> build_stations(Builder& b, const std::vector<Station>& st, const Vector3& ref, int k,
                                             int part) {
  std::vector<std::vector<int>> rings;
  for (const Station& s : st) {
    VertexInfo vi;
    vi.part = part;
    vi.frac = s.frac;
    rings.push_back(b.ring(s.c, s.d, ref, k, s.ra, s.rb, s.w, vi));
    if (rings.size() > 1) b.connect(rings[rings.size() - 2], rings.back());
  }
  return rings;
}

void connect_rings_best(Builder& b, const std::vector<int>& a, const std::vector<int>& c) {
  const std::size_t k = a.size();
  double best = 1e300;
  std::size_t best_off = 0;
  bool best_rev = false;
  for (int rev = 0; rev < 2; ++rev) {
    for (std::size_t off = 0; off < k; ++off) {
      double cost = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = rev ? (off + k - i) % k : (off + i) % k;
        cost += (b.verts[static_cast<std::size_t>(a[i])] - b.verts[static_cast<std::size_t>(c[j])]).norm();
      }
      if (cost < best) {
        best = cost;
        best_off = off;
        best_rev = rev != 0;
      }
    }
  }
  std::vector<int> aligned(k);
  for (std::size_t i = 0; i < k; ++i) aligned[i] = c[best_rev ? (best_off + k - i) % k : (best_off + i) % k];
  b.connect(a, aligned);
}

}  // namespace

std::array<int, 5> toy_hand_tip_vertices() {
  std::array<int, 5> tips{};
  for (int f = 0; f < 5; ++f) {
    tips[static_cast<std::size_t>(f)] = kPalmRings * kPalmK + 1 + f * (kFingerRings * kFingerK + 1) + kFingerRings * kFingerK;
  }
  return tips;
}

Matrix3 hand_region_rotation(Side side) {
  const Matrix3 to_camera = rot_x(std::numbers::pi);
  return side == Side::Left ? to_camera : Matrix3(to_camera * rot_z(std::numbers::pi));
}

namespace {

ModelSpec make_body_spec(std::uint64_t seed) {
  const ModelSpec hand = make_hand_spec(seed);
  const auto jp = body_joint_positions();
  BodyBuild bb;
  Builder& b = bb.b;
  bb.joint_rings.resize(22);
  const Vector3 ex(1, 0, 0), ez(0, 0, 1);

  // torso
  {
    auto st = chain_stations(jp, {kPelvis, kSpine1, kSpine2, kSpine3, kNeck}, {2, 2, 2, 2},
                             {0.15, 0.14, 0.14, 0.16, 0.06}, {0.10, 0.09, 0.095, 0.10, 0.055});
    auto rings = build_stations(b, st, ex, 24, kTorso);
    for (std::size_t i = 0; i < st.size(); ++i) {
      if (st[i].frac == std::floor(st[i].frac)) {
        const int j = std::array<int, 5>{kPelvis, kSpine1, kSpine2, kSpine3, kNeck}[static_cast<std::size_t>(st[i].frac)];
        bb.joint_rings[static_cast<std::size_t>(j)] = rings[i];
      }
    }
    VertexInfo vi;
    vi.part = kTorso;
    b.cap_start(b.point(Vector3(0, -0.07, 0), only(kPelvis), vi), rings.front());
  }
  // head
  {
    const Vector3 crown(0, 0.80, 0.01);
    const Vector3 neck = jp[kNeck], head = jp[kHead];
    std::vector<Station> st = {
        {lerp(neck, head, 0.5), head - neck, 0.055, 0.055, only(kNeck), 0.5},
        {head, crown - neck, 0.085, 0.085, at_joint(kNeck, kHead), 1.0},
        {lerp(head, crown, 1.0 / 3.0), crown - head, 0.09, 0.09, only(kHead), 1.33},
        {lerp(head, crown, 2.0 / 3.0), crown - head, 0.075, 0.075, only(kHead), 1.67},
        {lerp(head, crown, 0.92), crown - head, 0.04, 0.04, only(kHead), 1.92},
    };
    auto rings = build_stations(b, st, ex, 20, kHeadPart);
    bb.joint_rings[kHead] = rings[1];
    VertexInfo vi;
    vi.part = kHeadPart;
    b.cap_end(rings.back(), b.point(crown, only(kHead), vi));
  }
  // arms, hands
  for (const Side side : kSides) {
    const int o = side == Side::Left ? 0 : kRCollar - kLCollar;
    const int collar = kLCollar + o, sh = kLShoulder + o, elb = kLElbow + o, wr = kLWrist + o;
    auto st = chain_stations(jp, {collar, sh, elb, wr}, {1, 2, 4}, {0.05, 0.055, 0.042, 0.032},
                             {0.05, 0.055, 0.042, 0.032});
    // The wrist station is replaced by the hand's palm ring.
    st.pop_back();
    st.back().c = jp[static_cast<std::size_t>(wr)] - 0.022 * st.back().d.normalized();
    auto rings = build_stations(b, st, ez, 12, side == Side::Left ? kArmL : kArmR);
    bb.joint_rings[static_cast<std::size_t>(collar)] = rings[0];
    bb.joint_rings[static_cast<std::size_t>(sh)] = rings[2];
    bb.joint_rings[static_cast<std::size_t>(elb)] = rings[5];

    const Matrix3 rot = side == Side::Left ? Matrix3::Identity() : rot_z(std::numbers::pi);
    const std::size_t si = static_cast<std::size_t>(side_index(side));
    const int first = static_cast<int>(b.verts.size());
    for (Eigen::Index v = 0; v < hand.template_vertices.rows(); ++v) {
      VertexInfo vi;
      vi.part = side == Side::Left ? kHandL : kHandR;
      vi.center = jp[static_cast<std::size_t>(wr)];
      vi.ring = false;
      b.add(jp[static_cast<std::size_t>(wr)] + rot * hand.template_vertices.row(v).transpose(), only(wr), vi);
      bb.hand_ids[si].push_back(first + static_cast<int>(v));
    }
    for (Eigen::Index f = 0; f < hand.faces.rows(); ++f) {
      b.faces.emplace_back(first + hand.faces(f, 0), first + hand.faces(f, 1), first + hand.faces(f, 2));
    }
    for (int k = 0; k < kPalmK; ++k) bb.palm_ring[si].push_back(first + k);
    bb.joint_rings[static_cast<std::size_t>(wr)] = bb.palm_ring[si];
    connect_rings_best(b, rings.back(), bb.palm_ring[si]);
  }
  // legs
  for (const Side side : kSides) {
    const int o = side == Side::Left ? 0 : kRHip - kLHip;
    const int hip = kLHip + o, knee = kLKnee + o, ankle = kLAnkle + o, foot = kLFoot + o;
    auto st = chain_stations(jp, {hip, knee, ankle, foot}, {2, 2, 1}, {0.085, 0.055, 0.04, 0.035},
                             {0.085, 0.055, 0.04, 0.035});
    const Vector3 toe = jp[static_cast<std::size_t>(foot)] + Vector3(0, 0, 0.07);
    st.push_back({toe, Vector3(0, 0, 1), 0.03, 0.02, only(foot), 3.5});
    auto rings = build_stations(b, st, ex, 20, side == Side::Left ? kLegL : kLegR);
    bb.joint_rings[static_cast<std::size_t>(hip)] = rings[0];
    bb.joint_rings[static_cast<std::size_t>(knee)] = rings[3];
    bb.joint_rings[static_cast<std::size_t>(ankle)] = rings[6];
    bb.joint_rings[static_cast<std::size_t>(foot)] = rings[8];
    VertexInfo vi;
    vi.part = side == Side::Left ? kLegL : kLegR;
    b.cap_end(rings.back(), b.point(toe + Vector3(0, 0, 0.03), only(foot), vi));
  }

  const int nv = static_cast<int>(b.verts.size());
  // shape basis, authored frame
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * nv, 10);
  for (int v = 0; v < nv; ++v) {
    const VertexInfo& vi = b.info[static_cast<std::size_t>(v)];
    const Vector3& p = b.verts[static_cast<std::size_t>(v)];
    const Vector3& c = vi.center;
    auto set = [&](int comp, const Vector3& d) { basis.block(3 * v, comp, 3, 1) = d; };
    const bool left = vi.part == kArmL || vi.part == kLegL || vi.part == kHandL;
    const double s = left ? 1.0 : -1.0;
    set(0, Vector3(0, 0.06 * c.y(), 0));
    switch (vi.part) {
      case kTorso:
        if (vi.ring) set(1, 0.12 * (p - c));
        set(5, Vector3(0, 0.1 * std::max(c.y(), 0.0), 0));
        if (vi.ring && c.y() > 0.0 && c.y() < 0.3 && p.z() > c.z()) {
          set(7, Vector3(0, 0, 0.05 * std::sin(std::numbers::pi * c.y() / 0.3) * (p.z() - c.z()) / 0.1));
        }
        if (c.y() < 0.05) set(9, Vector3(0.12 * (p.x() - c.x()), 0, 0));
        break;
      case kHeadPart:
        set(5, Vector3(0, 0.1 * jp[kNeck].y(), 0));
        set(8, 0.12 * (p - jp[kHead]));
        break;
      case kArmL:
      case kArmR: {
        const int sh = vi.part == kArmL ? kLShoulder : kRShoulder;
        if (vi.ring) set(1, 0.12 * (p - c));
        if (vi.frac >= 1.0) set(2, 0.1 * (c - jp[static_cast<std::size_t>(sh)]));
        set(4, Vector3(0.025 * s * std::min(vi.frac, 1.0), 0, 0));
        set(5, Vector3(0, 0.1 * jp[kLShoulder].y(), 0));
        break;
      }
      case kLegL:
      case kLegR: {
        const int hip = vi.part == kLegL ? kLHip : kRHip;
        if (vi.ring) set(1, 0.12 * (p - c));
        set(3, 0.1 * (c - jp[static_cast<std::size_t>(hip)]));
        set(9, Vector3(0.02 * s, 0, 0));
        break;
      }
      case kHandL:
      case kHandR: {
        const int sh = vi.part == kHandL ? kLShoulder : kRShoulder;
        set(2, 0.1 * (c - jp[static_cast<std::size_t>(sh)]));
        set(4, Vector3(0.025 * s, 0, 0));
        set(5, Vector3(0, 0.1 * jp[kLShoulder].y(), 0));
        set(6, 0.12 * (p - c));
        break;
      }
      default:
        break;
    }
  }

  // Jitter non-hand vertices; hand regions keep the hand template's jitter.
  std::vector<Vector3> verts = b.verts;
  std::vector<Vector3> jitter(verts.size(), Vector3::Zero());
  add_jitter(jitter, seed, 0x626f6479ULL);
  std::vector<char> is_hand(verts.size(), 0);
  for (const auto& ids : bb.hand_ids)
    for (int id : ids) is_hand[static_cast<std::size_t>(id)] = 1;
  for (std::size_t v = 0; v < verts.size(); ++v)
    if (!is_hand[v]) verts[v] += jitter[v];

  // Authored Y-up -> camera convention (y down, facing -z).
  const Matrix3 to_camera = rot_x(std::numbers::pi);
  for (auto& v : verts) v = to_camera * v;
  for (int v = 0; v < nv; ++v)
    for (int k = 0; k < 10; ++k) basis.block(3 * v, k, 3, 1) = to_camera * basis.block(3 * v, k, 3, 1);

  ModelSpec spec;
  spec.kind = ModelKind::Body;
  spec.parents = kBodyParents;
  spec.template_vertices = to_points(verts);
  spec.faces = to_faces(b.faces);
  spec.joint_regressor.resize(22, nv);
  for (int j = 0; j < 22; ++j) spec.joint_regressor.row(j) = ring_average(nv, bb.joint_rings[static_cast<std::size_t>(j)]);
  spec.skinning_weights = skin_matrix(b.skin, 22);
  spec.shape_basis = basis;
  for (int j = 0; j < 22; ++j) spec.named_joints[kBodyJointNames[static_cast<std::size_t>(j)]] = j;
  for (const Side side : kSides) {
    const std::size_t si = static_cast<std::size_t>(side_index(side));
    HandRegion& r = spec.hand_regions[si];
    r.vertex_indices = bb.hand_ids[si];
    r.boundary_ring = bb.palm_ring[si];
    r.correspondence.resize(r.vertex_indices.size());
    for (std::size_t k = 0; k < r.correspondence.size(); ++k) r.correspondence[k] = static_cast<int>(k);
    r.marker_weights.resize(5, static_cast<Eigen::Index>(r.vertex_indices.size()));
    for (int m = 0; m < 5; ++m) {
      r.marker_weights.row(m) = hand.joint_regressor.row(kHandAnchorJoints[static_cast<std::size_t>(m)]);
    }
  }
  return spec;
}

}  // namespace

ModelSpec generate_toy_spec(ModelKind kind, std::uint64_t seed) {
  ModelSpec spec = kind == ModelKind::Body ? make_body_spec(seed) : make_hand_spec(seed);
  validate_spec(spec);
  return spec;
}

}  // namespace posefuse
