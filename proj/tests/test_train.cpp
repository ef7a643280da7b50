#include <doctest.h>

#include "fixtures.hpp"
#include "helpers.hpp"

#include <json.hpp>

#include <sstream>

using namespace posefuse;
using namespace testutil;

namespace {

const std::vector<PreparedSample>& small_train(const Backbones& bb) {
  static const std::vector<PreparedSample> s =
      prepare_samples(small_models(), bb.hand, small_dataset(), small_dataset().train);
  return s;
}

const Backbones& shared_backbones() {
  static const Backbones bb = frozen_backbones();
  return bb;
}

ShapeTarget hand_target(const ModelSpec& hand, std::mt19937_64& rng, Eigen::VectorXd* beta_out = nullptr) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd beta(hand.shape_dim());
  for (Eigen::Index k = 0; k < beta.size(); ++k) beta(k) = n(rng);
  const CanonicalHand c =
      canonical_hand_mesh(hand, std::vector<Vector3>(static_cast<std::size_t>(hand.joint_count() - 1), Vector3::Zero()), beta);
  const Matrix3 r = random_rotation(rng);
  const Vector3 t(0.3 * n(rng), 0.3 * n(rng), 3.0 + 0.3 * n(rng));
  if (beta_out) *beta_out = beta;
  return {transform(r, t, c.mesh.vertices), transform(r, t, c.keypoints)};
}

}  // namespace

TEST_CASE("zero epochs return the initial parameters") {
  const Config cfg = [] {
    Config c = small_config();
    c.train.epochs = 0;
    return c;
  }();
  const ChamParams init = init_cham(17, 2, 8);
  std::ostringstream log;
  TrainHooks hooks;
  hooks.log = &log;
  TrainReport rep;
  const ChamParams out = train_cham(cfg, small_models(), shared_backbones(), {}, init, hooks, &rep);
  CHECK(cham_hash(out) == cham_hash(init));
  CHECK(rep.steps == 0);
  CHECK(log.str().empty());
}

TEST_CASE("training moves only CHAM and logs one record per step") {
  const Config cfg = small_config();
  const Backbones& bb = shared_backbones();
  const std::uint64_t body_hash = params_hash(bb.body), hand_hash = params_hash(bb.hand);
  const ChamParams init = init_cham(17, 2, 8);
  std::ostringstream log;
  TrainHooks hooks;
  hooks.log = &log;
  int epochs_seen = 0;
  hooks.epoch_end = [&](int, const ChamParams&) { ++epochs_seen; };
  TrainReport rep;
  const ChamParams out = train_cham(cfg, small_models(), bb, small_train(bb), init, hooks, &rep);
  CHECK(params_hash(bb.body) == body_hash);
  CHECK(params_hash(bb.hand) == hand_hash);
  CHECK(cham_hash(out) != cham_hash(init));
  CHECK(rep.steps == (cfg.data.train + cfg.train.batch - 1) / cfg.train.batch);
  CHECK(epochs_seen == cfg.train.epochs);
  REQUIRE(rep.epoch_loss.size() == 1);
  std::istringstream in(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.at("step") == ++lines);
    CHECK(rec.at("loss").at("total").get<double>() >= 0.0);
  }
  CHECK(lines == rep.steps);
  // Same seed, same result.
  CHECK(cham_hash(train_cham(cfg, small_models(), bb, small_train(bb), init)) == cham_hash(out));
}

TEST_CASE("training refuses unfrozen or tampered backbones") {
  const Config cfg = small_config();
  const ChamParams init = init_cham(17, 2, 8);
  const Backbones loose = random_backbones();
  CHECK_THROWS_AS(train_cham(cfg, small_models(), loose, small_train(shared_backbones()), init), Error);
  Backbones tampered = shared_backbones();
  tampered.body.pose_b(0) += 1e-9;
  try {
    train_cham(cfg, small_models(), tampered, small_train(shared_backbones()), init);
    FAIL("expected FrozenParamsModified");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::FrozenParamsModified);
  }
}

TEST_CASE("shape fit with zero iterations stays at the zero shape") {
  const Models& m = small_models();
  std::mt19937_64 rng(1);
  const ShapeTarget tg = hand_target(m.hand, rng);
  ShapeFitOptions o;
  o.iters = 0;
  const ShapeFitResult r = fit_shape_to_target(m.hand, tg, o);
  CHECK(r.beta.isZero(0.0));
  REQUIRE(r.trace.size() == 1);
  CHECK(r.point_error_mm > 0.0);
  ShapeTarget bad = tg;
  bad.keypoints.conservativeResize(5, 3);
  CHECK_THROWS_AS(fit_shape_to_target(m.hand, bad), Error);
}

TEST_CASE("shape fit recovers a target drawn from the same model") {
  const Models& m = small_models();
  std::mt19937_64 rng(2);
  for (int t = 0; t < 3; ++t) {
    Eigen::VectorXd beta;
    const ShapeTarget tg = hand_target(m.hand, rng, &beta);
    const ShapeFitResult r = fit_shape_to_target(m.hand, tg);
    CHECK(r.point_error_mm < 0.1);
    CHECK((r.beta - beta).norm() < 1e-2);
    CHECK(r.trace.back() < r.trace.front());
  }
}

TEST_CASE("the hand basis fits hand targets better than the body basis") {
  const Models& m = small_models();
  const ModelSpec body_basis = hand_with_body_basis(m.hand, m.body, Side::Left);
  CHECK(body_basis.shape_dim() == m.body.shape_dim());
  std::mt19937_64 rng(3);
  for (int t = 0; t < 5; ++t) {
    const ShapeTarget tg = hand_target(m.hand, rng);
    CHECK(fit_shape_to_target(m.hand, tg).point_error_mm < fit_shape_to_target(body_basis, tg).point_error_mm);
  }
}
