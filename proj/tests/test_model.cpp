#include <doctest.h>

#include "helpers.hpp"
#include "posefuse/model.hpp"
#include "posefuse/toy_models.hpp"

#include <cmath>
#include <numbers>

using namespace posefuse;
using namespace testutil;

namespace {

const ModelSpec& body() {
  static const ModelSpec s = generate_toy_spec(ModelKind::Body, 7);
  return s;
}

const ModelSpec& hand() {
  static const ModelSpec s = generate_toy_spec(ModelKind::Hand, 7);
  return s;
}

PoseState random_pose(const ModelSpec& spec, std::mt19937_64& rng, double angle = 1.0) {
  PoseState p = zero_pose(spec);
  for (auto& r : p.local_rotations) r = axis_angle_to_matrix<double>(random_axis_angle(rng, angle));
  p.root_orientation = random_rotation(rng);
  std::normal_distribution<double> n(0.0, 1.0);
  p.root_translation = Vector3(n(rng), n(rng), n(rng));
  for (Eigen::Index b = 0; b < p.shape.size(); ++b) p.shape(b) = n(rng);
  return p;
}

}  // namespace

TEST_CASE("toy specs have the expected structure") {
  CHECK(body().joint_count() == 22);
  CHECK(hand().joint_count() == 16);
  CHECK(hand().vertex_count() == kToyHandVertices);
  CHECK(body().vertex_count() > 1500);
  CHECK(body().shape_dim() == 10);
  CHECK(hand().shape_dim() == 10);
  for (const char* name : {"pelvis", "left_wrist", "right_wrist"}) CHECK(body().named_joints.count(name) == 1);
  for (const Side s : kSides) CHECK(body().region(s).vertex_indices.size() == static_cast<std::size_t>(hand().vertex_count()));
  // each finger chain wrist -> mcp -> pip -> dip
  for (int f = 0; f < 5; ++f) {
    int depth = 0;
    for (int j = 3 + 3 * f; j > 0; j = hand().parents[static_cast<std::size_t>(j)]) ++depth;
    CHECK(depth == 3);
  }
}

TEST_CASE("toy generation is deterministic and round-trips") {
  const ModelSpec again = generate_toy_spec(ModelKind::Body, 7);
  CHECK(spec_hash(again) == spec_hash(body()));
  CHECK(spec_to_json(again) == spec_to_json(body()));
  CHECK(spec_hash(generate_toy_spec(ModelKind::Body, 8)) != spec_hash(body()));
  const ModelSpec back = spec_from_json(spec_to_json(body()));
  CHECK(spec_hash(back) == spec_hash(body()));
  CHECK(back.template_vertices == body().template_vertices);
  CHECK(back.shape_basis == body().shape_basis);
  const ModelSpec hback = spec_from_json(spec_to_json(hand()));
  CHECK(spec_hash(hback) == spec_hash(hand()));
}

TEST_CASE("validation names the failing field") {
  ModelSpec bad = body();
  bad.skinning_weights.row(3) *= 0.9;
  try {
    validate_spec(bad);
    FAIL("expected violation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvariantViolation);
    CHECK(e.detail() == "skinning_weights");
  }
  ModelSpec nopelvis = body();
  nopelvis.named_joints.erase("pelvis");
  try {
    validate_spec(nopelvis);
    FAIL("expected violation");
  } catch (const Error& e) {
    CHECK(e.detail() == "named_joints");
  }
  CHECK_THROWS_AS(spec_from_json("{not json"), Error);
  CHECK_THROWS_AS(spec_from_json(R"({"schema":"other"})"), Error);
}

TEST_CASE("body hand regions are rigid copies of the hand template") {
  const ShapedModel b = shape_mesh(body(), Eigen::VectorXd::Zero(10));
  const Vector3 hand_wrist = shape_mesh(hand(), Eigen::VectorXd::Zero(10)).rest_joints.row(0).transpose();
  for (const Side s : kSides) {
    const HandRegion& reg = body().region(s);
    const Matrix3 r = hand_region_rotation(s);
    const Vector3 wrist = b.rest_joints.row(body().joint(std::string(side_name(s)) + "_wrist")).transpose();
    double worst = 0.0;
    for (std::size_t k = 0; k < reg.vertex_indices.size(); ++k) {
      const Vector3 h = hand().template_vertices.row(reg.correspondence[k]).transpose();
      const Vector3 expect = wrist + r * (h - hand_wrist);
      worst = std::max(worst, (b.vertices.row(reg.vertex_indices[k]).transpose() - expect).norm());
    }
    CHECK(worst < 1e-12);
    CHECK(is_rotation(r));
  }
  // left hand sits at image right (+x), head above the pelvis (-y)
  CHECK(b.rest_joints(body().joint("left_wrist"), 0) > 0.5);
  CHECK(b.rest_joints(body().joint("head"), 1) < -0.5);
}

TEST_CASE("shape_mesh linearity") {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(10);
  CHECK(shape_mesh(body(), zero).vertices == body().template_vertices);
  Eigen::VectorXd e1 = zero;
  e1(0) = 1.0;
  const Points3d first = Eigen::Map<const Points3d>(Eigen::VectorXd(body().shape_basis.col(0)).data(), body().vertex_count(), 3);
  CHECK((shape_mesh(body(), e1).vertices - body().template_vertices - first).cwiseAbs().maxCoeff() < 1e-15);
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd b1 = Eigen::VectorXd::Random(10);
    const Eigen::VectorXd b2 = Eigen::VectorXd::Random(10);
    const Points3d lhs = shape_mesh(body(), b1).vertices + shape_mesh(body(), b2).vertices - body().template_vertices;
    worst = std::max(worst, (lhs - shape_mesh(body(), b1 + b2).vertices).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(shape_mesh(body(), Eigen::VectorXd::Zero(3)), Error);
}

TEST_CASE("forward kinematics examples") {
  PoseState p = zero_pose(body());
  const ShapedModel s = shape_mesh(body(), p.shape);
  CHECK((forward_kinematics(body(), p, s.rest_joints).joints() - s.rest_joints).cwiseAbs().maxCoeff() <= 1e-12);

  const int elb = body().joint("left_elbow");
  const int wr = body().joint("left_wrist");
  p.local_rotations[static_cast<std::size_t>(elb - 1)] = rot_z(std::numbers::pi / 2);
  const Points3d j = forward_kinematics(body(), p, s.rest_joints).joints();
  const Vector3 expect = s.rest_joints.row(elb).transpose() +
                         rot_z(std::numbers::pi / 2) * (s.rest_joints.row(wr) - s.rest_joints.row(elb)).transpose();
  CHECK((j.row(wr).transpose() - expect).norm() < 1e-12);

  PoseState t = zero_pose(body());
  t.root_translation = Vector3(0.3, -0.2, 3.0);
  const Points3d jt = forward_kinematics(body(), t, s.rest_joints).joints();
  for (int k = 0; k < 22; ++k) CHECK((jt.row(k) - s.rest_joints.row(k) - t.root_translation.transpose()).norm() < 1e-15);
  CHECK(keypoints_3d(body(), t) == jt);
}

TEST_CASE("global joint orientation") {
  PoseState p = zero_pose(body());
  CHECK(global_joint_orientation(body(), p, "left_wrist") == Matrix3::Identity());
  const int sh = body().joint("left_shoulder");
  const int elb = body().joint("left_elbow");
  p.local_rotations[static_cast<std::size_t>(sh - 1)] = rot_z(30.0 * std::numbers::pi / 180);
  p.local_rotations[static_cast<std::size_t>(elb - 1)] = rot_x(40.0 * std::numbers::pi / 180);
  const Matrix3 expect = rot_z(30.0 * std::numbers::pi / 180) * rot_x(40.0 * std::numbers::pi / 180);
  CHECK((global_joint_orientation(body(), p, "left_wrist") - expect).cwiseAbs().maxCoeff() < 1e-12);
  PoseState q = zero_pose(body());
  std::mt19937_64 rng(1);
  q.root_orientation = random_rotation(rng);
  for (const auto& [name, idx] : body().named_joints) CHECK(global_joint_orientation(body(), q, name) == q.root_orientation);
  CHECK_THROWS_AS(global_joint_orientation(body(), q, "tail"), Error);
}

TEST_CASE("FK chain consistency over random poses") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const PoseState p = random_pose(body(), rng);
    const ShapedModel s = shape_mesh(body(), p.shape);
    const auto sk = forward_kinematics(body(), p, s.rest_joints);
    for (int j = 1; j < 22; ++j) {
      const Matrix3 g = global_orientation<double>(body().parents, p, j);
      CHECK((sk.global[static_cast<std::size_t>(j)].rotation - g).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("skinning properties") {
  const ShapedModel s = shape_mesh(body(), Eigen::VectorXd::Zero(10));
  PoseState p = zero_pose(body());
  const Mesh rest = skin_mesh(body(), s.vertices, forward_kinematics(body(), p, s.rest_joints));
  CHECK((rest.vertices - s.vertices).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(rest.faces == body().faces);

  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    PoseState r = zero_pose(body());
    r.root_orientation = random_rotation(rng);
    r.root_translation = Vector3::Random();
    const Mesh m = skin_mesh(body(), s.vertices, forward_kinematics(body(), r, s.rest_joints));
    // root transform about the pelvis: v -> R (v - pelvis) + pelvis + t
    const Vector3 pelvis = s.rest_joints.row(0).transpose();
    const Rigid t{r.root_orientation, pelvis + r.root_translation - r.root_orientation * pelvis};
    worst = std::max(worst, (m.vertices - apply_rigid(t, s.vertices)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);

  // hand vertices carry weight 1 on the wrist: they follow the wrist frame exactly
  PoseState w = random_pose(body(), rng);
  const ShapedModel sw = shape_mesh(body(), w.shape);
  const auto sk = forward_kinematics(body(), w, sw.rest_joints);
  const Mesh mw = skin_mesh(body(), sw.vertices, sk);
  const int wr = body().joint("left_wrist");
  const Rigid a = sk.skinning(wr);
  for (int v : body().region(Side::Left).vertex_indices) {
    CHECK((mw.vertices.row(v).transpose() - a(sw.vertices.row(v).transpose())).norm() < 1e-12);
  }
}

TEST_CASE("skinned point sets match skinned vertices") {
  std::mt19937_64 rng(13);
  const PoseState p = random_pose(body(), rng);
  const ShapedModel s = shape_mesh(body(), p.shape);
  const auto sk = forward_kinematics(body(), p, s.rest_joints);
  const Mesh m = skin_mesh(body(), s.vertices, sk);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, body().vertex_count());
  w(0, 5) = 1.0;
  w(1, 100) = 0.25;
  w(1, 900) = 0.75;
  w(2, body().region(Side::Right).vertex_indices[20]) = 1.0;
  const SkinnedPoints sp = skinned_points(body(), w);
  const Points3d got = pose_skinned_points<double>(sp, sk, p.shape);
  const Points3d expect = w * m.vertices;
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
  const LinearPoints lp = regress_points(body(), body().joint_regressor);
  CHECK((lp.eval<double>(p.shape) - s.rest_joints).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("project_points") {
  Camera cam;
  cam.focal = Eigen::Vector2d(1000, 1000);
  cam.principal = Eigen::Vector2d(500, 500);
  Points3d p(3, 3);
  p << 0, 0, 1, 0.1, 0, 1, 0.1, -0.2, 2;
  const Points2d px = project_points<double>(cam, p);
  CHECK(px(0, 0) == 500.0);
  CHECK(px(1, 0) == doctest::Approx(600.0).epsilon(1e-12));
  Points3d far = p;
  far.col(2) *= 2.0;
  const Points2d half = project_points<double>(cam, far);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs((half(i, 0) - 500) * 2 - (px(i, 0) - 500)) < 1e-9);
    CHECK(std::abs((half(i, 1) - 500) * 2 - (px(i, 1) - 500)) < 1e-9);
  }
  p(2, 2) = -1.0;
  try {
    project_points<double>(cam, p);
    FAIL("expected BehindCamera");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BehindCamera);
    CHECK(e.index() == 2);
  }
}
