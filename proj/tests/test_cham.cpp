#include <doctest.h>

#include "fixtures.hpp"
#include "posefuse/gradcheck.hpp"

using namespace posefuse;
using namespace testutil;

namespace {

bool all_zero(const ModulationStack& s) {
  for (const auto& g : s.grids) {
    if (!g.data.isZero(0.0)) return false;
  }
  return true;
}

std::array<HandObservation, 2> observations(const Backbones& bb, const Sample& s) { return observe_hands(bb.hand, s); }

TokenGrid random_grid(std::mt19937_64& rng, int h, int w, int c, const Affine2D& a) {
  std::normal_distribution<double> n(0.0, 1.0);
  TokenGrid g(h, w, c, a);
  for (Eigen::Index i = 0; i < g.data.size(); ++i) g.data.data()[i] = n(rng);
  return g;
}

}  // namespace

TEST_CASE("init_cham has zero branches and random attention") {
  const ChamParams p = init_cham(17, 2, 8);
  for (const auto& br : p.branch) {
    REQUIRE(br.w.size() == 2);
    for (const auto& w : br.w) CHECK(w.isZero(0.0));
    for (const auto& b : br.b) CHECK(b.isZero(0.0));
  }
  CHECK_FALSE(p.attention.empty());
  CHECK(p.attention[0].wq.norm() > 0.0);
  CHECK(cham_hash(init_cham(17, 2, 8)) == cham_hash(p));
  CHECK(cham_hash(init_cham(18, 2, 8)) != cham_hash(p));
}

TEST_CASE("fresh CHAM emits an all-zero stack for any input") {
  const Backbones bb = random_backbones();
  const Models& m = small_models();
  const ChamParams p = init_cham(17, 2, 8);
  for (const auto& s : small_dataset().samples) {
    const ModulationStack st = cham_forward(observations(bb, s)[0], observations(bb, s)[1], p, m.grid);
    REQUIRE(st.grids.size() == 2);
    CHECK(all_zero(st));
  }
}

TEST_CASE("no detected hands give a zero stack whatever the weights") {
  const Backbones bb = random_backbones();
  ChamParams p = init_cham(17, 2, 8);
  randomize(p, 3);
  for (auto& br : p.branch) {
    for (auto& b : br.b) b.setZero();
  }
  const ModulationStack st =
      cham_forward(undetected_hand(bb.hand, Side::Left), undetected_hand(bb.hand, Side::Right), p, small_models().grid);
  CHECK(all_zero(st));
}

TEST_CASE("per-block projection is linear and identity maps copy features") {
  std::mt19937_64 rng(5);
  const Affine2D a = Affine2D::scale_offset(4.0, 4.0, 100.0, 50.0);
  const TokenGrid f = random_grid(rng, 8, 8, 8, a);
  const TokenGrid g = random_grid(rng, 8, 8, 8, a);
  BranchMaps br;
  for (int k = 0; k < 2; ++k) {
    br.w.push_back(Eigen::MatrixXd::Identity(8, 8));
    br.b.push_back(Eigen::VectorXd::Zero(8));
  }
  const auto out = project_per_block(br, f);
  REQUIRE(out.size() == 2);
  CHECK(out[1].data == f.data);
  CHECK(out[1].affine == f.affine);
  for (int k = 0; k < 2; ++k) br.w[static_cast<std::size_t>(k)] = Eigen::MatrixXd::Random(8, 8);
  TokenGrid sum = f;
  sum.data = 2.0 * f.data - 0.5 * g.data;
  const auto lhs = project_per_block(br, sum);
  const auto pf = project_per_block(br, f);
  const auto pg = project_per_block(br, g);
  for (int k = 0; k < 2; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    CHECK((lhs[ks].data - (2.0 * pf[ks].data - 0.5 * pg[ks].data)).norm() < 1e-12);
  }
}

TEST_CASE("realignment lands the crop over its image footprint") {
  const Models& m = small_models();
  // Crop covering body cells (row 4..5, col 3..4): 48 px square at (72, 96).
  const Affine2D crop = Affine2D::scale_offset(6.0, 6.0, 72.0, 96.0);
  TokenGrid g(8, 8, 8, crop);
  g.data.setOnes();
  const TokenGrid out = realign_to_body(g, m.grid.h, m.grid.w, m.grid.affine);
  CHECK(out.h == 16);
  CHECK(out.w == 12);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 12; ++c) {
      const bool inside = (r == 4 || r == 5) && (c == 3 || c == 4);
      CHECK(out.data.row(r * 12 + c).sum() == doctest::Approx(inside ? 8.0 : 0.0));
    }
  }
}

TEST_CASE("max merge is associative and elementwise") {
  std::mt19937_64 rng(6);
  auto stack = [&] {
    std::vector<TokenGrid> s;
    for (int k = 0; k < 2; ++k) s.push_back(random_grid(rng, 16, 12, 8, Affine2D{}));
    return s;
  };
  for (int t = 0; t < 20; ++t) {
    const auto a = stack(), b = stack(), c = stack();
    const ModulationStack ab = merge_hands(a, b);
    const ModulationStack bc = merge_hands(b, c);
    const ModulationStack left = merge_hands(ab.grids, c);
    const ModulationStack right = merge_hands(a, bc.grids);
    for (int k = 0; k < 2; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      CHECK(left.grids[ks].data == right.grids[ks].data);
      CHECK(ab.grids[ks].data == a[ks].data.cwiseMax(b[ks].data));
    }
  }
  auto short_stack = stack();
  short_stack.pop_back();
  CHECK_THROWS_AS(merge_hands(stack(), short_stack), Error);
}

TEST_CASE("conditioning runs only when both hands are detected") {
  const Backbones bb = random_backbones();
  const Sample& s = find_sample(SampleKind::InteractingHands, true);
  const auto obs = observations(bb, s);
  ChamParams p = init_cham(17, 2, 8);
  const auto [l, r] = build_condition(obs[0], obs[1], p, 288.0, 384.0);
  CHECK(l.data.allFinite());
  CHECK((l.data - obs[0].tokens.data).norm() > 0.0);
  CHECK((r.data - obs[1].tokens.data).norm() > 0.0);
  const auto [ul, ur] = build_condition(undetected_hand(bb.hand, Side::Left), obs[1], p, 288.0, 384.0);
  CHECK(ul.data.isZero(0.0));
  CHECK(ur.data == obs[1].tokens.data);
  const auto [nl, nr] =
      build_condition(undetected_hand(bb.hand, Side::Left), undetected_hand(bb.hand, Side::Right), p, 288.0, 384.0);
  CHECK(nl.data.isZero(0.0));
  CHECK(nr.data.isZero(0.0));
}

TEST_CASE("CHAM blobs round-trip") {
  ChamParams p = init_cham(17, 2, 8);
  randomize(p, 9);
  const ChamParams q = deserialize_cham(serialize_cham(p));
  CHECK(cham_hash(q) == cham_hash(p));
  CHECK(flatten(q) == flatten(p));
  std::string bad = serialize_cham(p);
  bad[bad.size() / 3] = static_cast<char>(bad[bad.size() / 3] ^ 1);
  CHECK_THROWS_AS(deserialize_cham(bad), Error);
}

TEST_CASE("total loss gradient matches finite differences over all CHAM tensors") {
  const Models& m = small_models();
  const Backbones bb = random_backbones();
  const LossWeights w;
  const Sample* cases[] = {&find_sample(SampleKind::InteractingHands, true), &find_sample(SampleKind::SingleHand),
                           &find_sample(SampleKind::FullBody)};
  int seed = 20;
  for (const Sample* s : cases) {
    const PreparedSample prep = prepare_sample(m, bb.hand, *s);
    ChamParams p = init_cham(17, 2, 8);
    randomize(p, static_cast<std::uint64_t>(++seed), 0.05);
    const ChamLossGrad g = cham_loss_grad(m, bb, p, prep, w);
    auto f = [&](const Eigen::VectorXd& x) {
      ChamParams q = p;
      unflatten(q, x);
      return cham_loss(m, bb, q, prep, w).total;
    };
    const GradCheckReport r = check_gradient(f, flatten(p), flatten(g.grad));
    INFO("kind " << sample_kind_name(s->scene.kind) << " worst " << r.worst_index);
    CHECK(r.max_rel_error < 1e-4);
  }
}
