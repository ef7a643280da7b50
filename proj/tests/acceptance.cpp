// Acceptance checks: one PASS/FAIL line per criterion.
#include "posefuse/gradcheck.hpp"
#include "posefuse/hash.hpp"
#include "posefuse/metrics.hpp"
#include "posefuse/pipeline.hpp"
#include "posefuse/serialize.hpp"

#include <CLI11.hpp>

#include <Eigen/Geometry>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace posefuse;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Matrix3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
}

Vector3 random_axis_angle(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Vector3(n(rng), n(rng), n(rng)).normalized() * u(rng);
}

Points3d random_points(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Points3d p(n, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = g(rng);
  return p;
}

PoseState random_pose(const ModelSpec& spec, std::mt19937_64& rng, double angle) {
  PoseState p = zero_pose(spec);
  for (auto& r : p.local_rotations) r = axis_angle_to_matrix<double>(random_axis_angle(rng, angle));
  p.root_orientation = random_rotation(rng);
  std::normal_distribution<double> n(0.0, 0.3);
  p.root_translation = Vector3(n(rng), n(rng), 3.0 + n(rng));
  for (Eigen::Index b = 0; b < p.shape.size(); ++b) p.shape(b) = n(rng);
  return p;
}

Mesh posed_mesh(const ModelSpec& spec, const PoseState& pose) {
  const ShapedModel shaped = shape_mesh(spec, pose.shape);
  return skin_mesh(spec, shaped.vertices, forward_kinematics(spec, pose, shaped.rest_joints));
}

// Frozen backbones at the config's dimensions with random heads (no training).
Backbones random_frozen_backbones(const Config& cfg, const Models& m, std::uint64_t seed) {
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
  HandBackboneConfig hc;
  hc.channels = cfg.model.channels;
  hc.grid = cfg.model.hand_grid;
  hc.depth = cfg.model.hand_depth;
  hc.hidden = cfg.model.hand_hidden;
  hc.lift = cfg.model.lift;
  Backbones bb;
  bb.body = init_body_backbone(seed, bc, layout);
  bb.hand = init_hand_backbone(seed + 1, hc);
  std::mt19937_64 rng(seed + 2);
  std::normal_distribution<double> n(0.0, 0.05);
  for (Eigen::Index i = 0; i < bb.body.pose_w.size(); ++i) bb.body.pose_w.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < bb.hand.theta_w.size(); ++i) bb.hand.theta_w.data()[i] = n(rng);
  freeze(bb.body);
  freeze(bb.hand);
  return bb;
}

Config toy_gradient_config() {
  Config c;
  c.data.train = 40;
  c.data.heldout = 10;
  c.model.channels = 8;
  c.model.depth = 2;
  c.model.body_hidden = 16;
  c.model.lift = 32;
  c.model.hand_depth = 2;
  c.model.hand_hidden = 16;
  return c;
}

Outcome zero_init_identity() {
  const auto t0 = Clock::now();
  Config cfg;
  cfg.data.train = 100;
  cfg.data.heldout = 0;
  const Models m = make_models(cfg);
  const Dataset d = generate_dataset(cfg, m, 1001);
  const Backbones bb = random_frozen_backbones(cfg, m, 21);
  const ChamParams cham = init_cham(cfg.model.cham_seed, cfg.model.depth, cfg.model.channels);
  const double gen = seconds_since(t0);
  const auto t1 = Clock::now();
  int identical = 0;
  for (const Sample& s : d.samples) {
    const PoseState a = body_backbone_forward(bb.body, s.body_tokens, nullptr).pose;
    const std::array<HandObservation, 2> obs = observe_hands(bb.hand, s);
    const ModulationStack mod = cham_forward(obs[0], obs[1], cham, m.grid);
    const PoseState b = body_backbone_forward(bb.body, s.body_tokens, &mod).pose;
    if (a.root_orientation == b.root_orientation && a.root_translation == b.root_translation &&
        a.local_rotations == b.local_rotations && a.shape == b.shape)
      ++identical;
  }
  const double run = seconds_since(t1);
  const bool ok = identical == static_cast<int>(d.samples.size()) && run < 10.0;
  return {ok, std::to_string(identical) + "/" + std::to_string(d.samples.size()) + " bit-identical poses, " +
                  fmt("%.2f", run) + " s inference (+" + fmt("%.1f", gen) + " s scene generation), limit 10 s"};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const Config cfg = toy_gradient_config();
  const Models m = make_models(cfg);
  const Dataset d = generate_dataset(cfg, m, 77);
  const Backbones bb = random_frozen_backbones(cfg, m, 31);
  std::mt19937_64 rng(5);
  double worst_cham = 0.0, worst_jac = 0.0;
  std::set<SampleKind> kinds;
  const SampleKind order[] = {SampleKind::InteractingHands, SampleKind::SingleHand, SampleKind::FullBody,
                              SampleKind::InteractingHands, SampleKind::SingleHand};
  for (int inst = 0; inst < 5; ++inst) {
    const Sample* pick = nullptr;
    for (std::size_t k = static_cast<std::size_t>(7 * inst); k < d.samples.size() + static_cast<std::size_t>(7 * inst); ++k) {
      const Sample& s = d.samples[k % d.samples.size()];
      if (s.scene.kind == order[inst] && (s.scene.kind != SampleKind::InteractingHands || (s.scene.detected[0] && s.scene.detected[1]))) {
        pick = &s;
        break;
      }
    }
    if (!pick) return {false, "no sample of the requested kind"};
    kinds.insert(pick->scene.kind);
    const PreparedSample prep = prepare_sample(m, bb.hand, *pick);
    ChamParams p = init_cham(100 + static_cast<std::uint64_t>(inst), cfg.model.depth, cfg.model.channels);
    Eigen::VectorXd x = flatten(p);
    std::normal_distribution<double> n(0.0, 0.05);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n(rng);
    unflatten(p, x);
    const ChamLossGrad g = cham_loss_grad(m, bb, p, prep, cfg.train.weights);
    auto f = [&](const Eigen::VectorXd& y) {
      ChamParams q = p;
      unflatten(q, y);
      return cham_loss(m, bb, q, prep, cfg.train.weights).total;
    };
    worst_cham = std::max(worst_cham, check_gradient(f, x, flatten(g.grad)).max_rel_error);

    // transfer_jacobian on a random noisy alignment.
    Eigen::VectorXd beta(m.hand.shape_dim());
    for (Eigen::Index k = 0; k < beta.size(); ++k) beta(k) = n(rng) * 20.0;
    std::vector<Vector3> theta;
    for (int j = 1; j < m.hand.joint_count(); ++j) theta.push_back(random_axis_angle(rng, 0.4));
    const CanonicalHand c = canonical_hand_mesh(m.hand, theta, beta);
    Points3d targets = anchor_points(c.keypoints);
    const Matrix3 q = random_rotation(rng);
    for (Eigen::Index i = 0; i < 5; ++i) targets.row(i) = (q * targets.row(i).transpose() + Vector3(0.1, 0.0, 2.5)).transpose();
    targets += random_points(rng, 5, 0.005);
    const Points3d probes = c.mesh.vertices.topRows(8);
    const Eigen::MatrixXd jac = transfer_jacobian(c.keypoints, targets, probes);
    Eigen::VectorXd tx(15);
    for (int i = 0; i < 5; ++i) tx.segment<3>(3 * i) = targets.row(i).transpose();
    for (Eigen::Index row = 0; row < jac.rows(); ++row) {
      auto fj = [&](const Eigen::VectorXd& y) {
        Points3d tg(5, 3);
        for (int i = 0; i < 5; ++i) tg.row(i) = y.segment<3>(3 * i).transpose();
        return align_hand_to_body<double>(c.keypoints, tg)(probes.row(row / 3).transpose())(row % 3);
      };
      worst_jac = std::max(worst_jac, check_gradient(fj, tx, jac.row(row).transpose()).max_rel_error);
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_cham < 1e-4 && worst_jac < 1e-4 && secs < 60.0;
  return {ok, "C=8 D=2, 5 instances over " + std::to_string(kinds.size()) + " sample kinds; max rel. error total_loss " +
                  fmt("%.2e", worst_cham) + ", transfer_jacobian " + fmt("%.2e", worst_jac) + " (limit 1e-4), " +
                  fmt("%.1f", secs) + " s (limit 60 s)"};
}

Outcome kabsch_optimality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  std::normal_distribution<double> noise(0.0, 0.02);
  int ok_count = 0;
  double worst_margin = -1e300;
  for (int inst = 0; inst < 500; ++inst) {
    const int n = 5 + inst % 8;
    const Points3d src = random_points(rng, n, 1.0);
    const Matrix3 r0 = random_rotation(rng);
    Points3d dst(n, 3);
    for (int i = 0; i < n; ++i) dst.row(i) = (r0 * src.row(i).transpose() + Vector3(0.5, -1.0, 2.0)).transpose();
    for (Eigen::Index i = 0; i < dst.size(); ++i) dst.data()[i] += noise(rng);
    const double solver = registration_residual(kabsch_rigid(src, dst), src, dst);
    // Oracle: best of 1e5 random rotations, each with its optimal translation.
    const Vector3 sc = src.colwise().mean().transpose();
    const Vector3 dc = dst.colwise().mean().transpose();
    const Points3d a = src.rowwise() - sc.transpose();
    const Points3d b = dst.rowwise() - dc.transpose();
    const Matrix3 cross = b.transpose() * a;  // sum b_i a_i^T
    const double base = a.squaredNorm() + b.squaredNorm();
    double best = 1e300;
    for (int s = 0; s < 100000; ++s) best = std::min(best, base - 2.0 * (random_rotation(rng).cwiseProduct(cross)).sum());
    if (solver <= best + 1e-12 * std::max(1.0, best)) ++ok_count;
    worst_margin = std::max(worst_margin, solver - best);
  }
  const double secs = seconds_since(t0);
  return {ok_count == 500 && secs < 120.0,
          std::to_string(ok_count) + "/500 instances at or below the sampled optimum (largest solver - oracle " +
              fmt("%.2e", worst_margin) + "), " + fmt("%.1f", secs) + " s (limit 120 s)"};
}

Outcome kinematics_invariants() {
  const Config cfg;
  const Models m = make_models(cfg);
  std::mt19937_64 rng(505);
  double fk = 0.0, lbs = 0.0, lin = 0.0;
  int draws = 0;
  for (const ModelSpec* spec : {&m.body, &m.hand}) {
    for (int t = 0; t < 100; ++t, ++draws) {
      PoseState p = random_pose(*spec, rng, 0.8);
      // FK at zero pose reproduces the (shaped) rest joints.
      PoseState z = zero_pose(*spec);
      z.shape = p.shape;
      const ShapedModel shaped = shape_mesh(*spec, z.shape);
      fk = std::max(fk, (forward_kinematics(*spec, z, shaped.rest_joints).joints() - shaped.rest_joints).cwiseAbs().maxCoeff());
      // A rigid motion of the root moves every skinned vertex rigidly.
      const Mesh a = posed_mesh(*spec, p);
      const Matrix3 q = random_rotation(rng);
      const Vector3 d = random_points(rng, 1, 1.0).row(0).transpose();
      const Vector3 r0 = shaped.rest_joints.row(0).transpose();
      PoseState moved = p;
      moved.root_orientation = q * p.root_orientation;
      moved.root_translation = q * (r0 + p.root_translation) + d - r0;
      const Mesh b = posed_mesh(*spec, moved);
      Points3d expect = a.vertices;
      for (Eigen::Index i = 0; i < expect.rows(); ++i) expect.row(i) = (q * a.vertices.row(i).transpose() + d).transpose();
      lbs = std::max(lbs, (b.vertices - expect).cwiseAbs().maxCoeff());
      // Shape blend is linear: S(a + b) - S(0) = (S(a) - S(0)) + (S(b) - S(0)).
      Eigen::VectorXd ba = Eigen::VectorXd::Random(spec->shape_dim()), bb = Eigen::VectorXd::Random(spec->shape_dim());
      const Points3d s0 = shape_mesh(*spec, Eigen::VectorXd::Zero(spec->shape_dim())).vertices;
      const Points3d sa = shape_mesh(*spec, ba).vertices, sb = shape_mesh(*spec, bb).vertices;
      const Points3d sab = shape_mesh(*spec, ba + bb).vertices;
      lin = std::max(lin, ((sab - s0) - (sa - s0) - (sb - s0)).cwiseAbs().maxCoeff());
    }
  }
  const bool ok = fk <= 1e-12 && lbs <= 1e-9 && lin <= 1e-12;
  return {ok, std::to_string(draws) + " draws (body + hand): FK zero-pose " + fmt("%.1e", fk) + " (<=1e-12), LBS equivariance " +
                  fmt("%.1e", lbs) + " (<=1e-9), shape superposition " + fmt("%.1e", lin) + " (<=1e-12)"};
}

Outcome shape_expressiveness() {
  const auto t0 = Clock::now();
  const Config cfg;
  const Models m = make_models(cfg);
  const ModelSpec body_basis = hand_with_body_basis(m.hand, m.body, Side::Left);
  std::mt19937_64 rng(808);
  std::normal_distribution<double> n(0.0, 1.0);
  int wins = 0;
  double sum_hand = 0.0, sum_body = 0.0;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd beta(m.hand.shape_dim());
    for (Eigen::Index k = 0; k < beta.size(); ++k) beta(k) = n(rng);
    const CanonicalHand c = canonical_hand_mesh(
        m.hand, std::vector<Vector3>(static_cast<std::size_t>(m.hand.joint_count() - 1), Vector3::Zero()), beta);
    const Matrix3 r = random_rotation(rng);
    const Vector3 d(0.3 * n(rng), 0.3 * n(rng), 3.0 + 0.3 * n(rng));
    ShapeTarget tg{apply_rigid<double, double>(Rigid{r, d}, c.mesh.vertices), apply_rigid<double, double>(Rigid{r, d}, c.keypoints)};
    const double eh = fit_shape_to_target(m.hand, tg).point_error_mm;
    const double eb = fit_shape_to_target(body_basis, tg).point_error_mm;
    wins += eh < eb;
    sum_hand += eh;
    sum_body += eb;
  }
  const double secs = seconds_since(t0);
  return {wins >= 45 && secs < 300.0, "hand basis lower on " + std::to_string(wins) + "/50 targets (need 45); mean error hand " +
                                          fmt("%.2e", sum_hand / 50) + " mm vs body " + fmt("%.3f", sum_body / 50) + " mm, " +
                                          fmt("%.1f", secs) + " s (limit 300 s)"};
}

Outcome seam_monotonicity() {
  const Config cfg;
  const Models m = make_models(cfg);
  std::mt19937_64 rng(909);
  int monotone = 0;
  double worst_rise = 0.0;
  double min_initial = 1e300;
  for (int t = 0; t < 20; ++t) {
    PoseState p = random_pose(m.body, rng, 0.5);
    p.shape.setZero();
    const Mesh body = posed_mesh(m.body, p);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m.hand.shape_dim());
    beta(0) = t % 2 == 0 ? 3.0 : -3.0;  // deliberately larger / smaller than the body's hand
    std::vector<Vector3> theta;
    for (int j = 1; j < m.hand.joint_count(); ++j) theta.push_back(random_axis_angle(rng, 0.3));
    const CanonicalHand c = canonical_hand_mesh(m.hand, theta, beta);
    const Side side = t % 4 < 2 ? Side::Left : Side::Right;
    const Rigid tr = align_hand_to_body<double>(c.keypoints, body_target_points(m.body, p, side));
    double prev = 0.0;
    bool ok = true;
    for (int it = 0; it <= 5; ++it) {
      const double s =
          seam_discontinuity(transfer_hand(body, c.mesh, tr, m.body, side, {m.smooth.lambda, it, m.smooth.band}, m.adjacency),
                             body, m.body, side);
      if (it == 0) min_initial = std::min(min_initial, s);
      if (it > 0 && s > prev) {
        ok = false;
        worst_rise = std::max(worst_rise, s - prev);
      }
      prev = s;
    }
    monotone += ok;
  }
  return {monotone == 20, std::to_string(monotone) + "/20 mismatched transfers non-increasing over iterations 0..5 (smallest initial seam " +
                              fmt("%.3f", min_initial) + ", largest rise " + fmt("%.1e", worst_rise) + ")"};
}

Outcome metric_contracts() {
  std::mt19937_64 rng(1010);
  double zero = 0.0, trans = 0.0, pa_excess = -1e300;
  for (int t = 0; t < 1000; ++t) {
    const Points3d gt = random_points(rng, 30, 0.2);
    const Points3d pred = gt + random_points(rng, 30, 0.02);
    const Vector3 ag = gt.row(0).transpose(), ap = pred.row(0).transpose();
    zero = std::max({zero, mpvpe(gt, gt, ag, ag), pa_mpvpe(gt, gt),
                     mrrpe(gt.row(1).transpose(), gt.row(2).transpose(), gt.row(1).transpose(), gt.row(2).transpose())});
    const Vector3 d = random_points(rng, 1, 1.0).row(0).transpose();
    Points3d shifted = pred;
    shifted.rowwise() += d.transpose();
    trans = std::max({trans, std::abs(mpvpe(shifted, gt, ap + d, ag) - mpvpe(pred, gt, ap, ag)),
                      std::abs(mrrpe(pred.row(1).transpose() + d, pred.row(2).transpose() + d, gt.row(1).transpose(),
                                     gt.row(2).transpose()) -
                               mrrpe(pred.row(1).transpose(), pred.row(2).transpose(), gt.row(1).transpose(), gt.row(2).transpose())),
                      std::abs(pa_mpvpe(shifted, gt) - pa_mpvpe(pred, gt))});
    pa_excess = std::max(pa_excess, pa_mpvpe(pred, gt) - mpvpe(pred, gt, ap, ag));
  }
  const bool ok = zero <= 1e-9 && trans <= 1e-9 && pa_excess <= 1e-9;
  return {ok, "1000 pairs: GT-vs-GT max " + fmt("%.1e", zero) + " mm, translation change max " + fmt("%.1e", trans) +
                  " mm, max(pa_mpvpe - mpvpe) " + fmt("%.2e", pa_excess) + " mm (tolerance 1e-9)"};
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  try {
    return read_file(path);
  } catch (const Error&) {
    return {};
  }
}

Outcome determinism(const std::string& cli) {
  const auto root = std::filesystem::temp_directory_path() / "posefuse_acceptance_determinism";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);
  Config c = toy_gradient_config();
  c.data.train = 64;
  c.data.heldout = 16;
  c.train.epochs = 2;
  c.train.batch = 8;
  c.pretrain.epochs = 2;
  c.pretrain.batch = 8;
  const std::string cfg = (root / "config.json").string();
  write_file(cfg, config_to_json(c));
  std::vector<std::string> metrics, chams;
  for (int run = 0; run < 2; ++run) {
    const std::string dir = (root / ("run" + std::to_string(run))).string();
    const std::string base = " --config " + cfg;
    int rc = run_cli(cli, "generate" + base + " --seed 42 --out " + dir + "/data");
    if (rc == 0) rc = run_cli(cli, "pretrain" + base + " --data " + dir + "/data --out " + dir + "/models");
    if (rc == 0) rc = run_cli(cli, "train" + base + " --data " + dir + "/data --models " + dir + "/models --out " + dir + "/train");
    if (rc == 0)
      rc = run_cli(cli, "eval" + base + " --data " + dir + "/data --models " + dir + "/models --cham " + dir +
                            "/train/cham.bin --out " + dir + "/metrics.json");
    if (rc != 0) return {false, "cli run " + std::to_string(run) + " exited with " + std::to_string(rc)};
    metrics.push_back(slurp(dir + "/metrics.json"));
    chams.push_back(slurp(dir + "/train/cham.bin"));
  }
  const bool same = !metrics[0].empty() && metrics[0] == metrics[1] && chams[0] == chams[1];
  return {same, std::string("generate + pretrain + train + eval twice via the CLI: metrics JSON ") +
                    (metrics[0] == metrics[1] ? "byte-identical" : "differs") + " (" + std::to_string(metrics[0].size()) +
                    " bytes), cham.bin " + (chams[0] == chams[1] ? "identical" : "differs")};
}

struct ExperimentResult {
  Outcome integrity, core, ordering;
};

ExperimentResult desk_experiment() {
  ExperimentResult out;
  const auto t0 = Clock::now();
  const Config cfg;
  const Models m = make_models(cfg);
  const Dataset d = generate_dataset(cfg, m, 42);
  const double gen = seconds_since(t0);
  PretrainReport pr;
  const Backbones bb = pretrain_backbones(cfg, m, d, &pr);
  const std::uint64_t body_before = params_hash(bb.body), hand_before = params_hash(bb.hand);
  const std::vector<PreparedSample> train = prepare_samples(m, bb.hand, d, d.train);
  const std::vector<PreparedSample> held = prepare_samples(m, bb.hand, d, d.heldout);
  const ChamParams init = init_cham(cfg.model.cham_seed, cfg.model.depth, cfg.model.channels);
  const MetricsReport base = run_baseline(Strategy::Cham, m, bb, &init, held);
  const MetricsReport frozen = run_baseline(Strategy::Frozen, m, bb, nullptr, held);
  const MetricsReport copy = run_baseline(Strategy::WristCopy, m, bb, nullptr, held);
  const auto t_train = Clock::now();
  const ChamParams trained = train_cham(cfg, m, bb, train, init);
  const double train_secs = seconds_since(t_train);
  const MetricsReport cham = run_baseline(Strategy::Cham, m, bb, &trained, held);
  const double secs = seconds_since(t0);

  const std::uint64_t body_after = params_hash(bb.body), hand_after = params_hash(bb.hand);
  bool verified = true;
  try {
    verify_frozen(bb.body);
    verify_frozen(bb.hand);
  } catch (const Error&) {
    verified = false;
  }
  out.integrity = {body_before == body_after && hand_before == hand_after && verified,
                   "body " + hash_hex(body_before) + " -> " + hash_hex(body_after) + ", hand " + hash_hex(hand_before) + " -> " +
                       hash_hex(hand_after) + " across a " + std::to_string(cfg.train.epochs) + "-epoch CHAM run"};

  const double ratio = cham.mpvpe_hands / base.mpvpe_hands;
  const double full_ratio = cham.mpvpe_full / base.mpvpe_full;
  out.core = {ratio <= 0.7 && full_ratio <= 1.05,
              "held-out hand MPVPE " + fmt("%.2f", cham.mpvpe_hands) + " mm vs zero-init " + fmt("%.2f", base.mpvpe_hands) +
                  " mm (ratio " + fmt("%.4f", ratio) + ", need <= 0.7); full-body " + fmt("%.2f", cham.mpvpe_full) + " vs " +
                  fmt("%.2f", base.mpvpe_full) + " mm (ratio " + fmt("%.4f", full_ratio) + ", need <= 1.05); wrist " +
                  fmt("%.3f", base.wrist_geodesic) + " -> " + fmt("%.3f", cham.wrist_geodesic) + " rad; " +
                  std::to_string(cfg.data.train) + "/" + std::to_string(cfg.data.heldout) + " scenes, pretrain loss " +
                  fmt("%.3f", pr.step_loss.empty() ? 0.0 : pr.step_loss.front()) + " -> " +
                  fmt("%.3f", pr.step_loss.empty() ? 0.0 : pr.step_loss.back()) + "; " + fmt("%.0f", secs) + " s total (" +
                  fmt("%.0f", gen) + " s generation, " + fmt("%.0f", train_secs) + " s CHAM training)"};

  const bool order = copy.mpvpe_hands > frozen.mpvpe_hands && cham.mpvpe_hands < frozen.mpvpe_hands &&
                     cham.mpvpe_hands < copy.mpvpe_hands;
  out.ordering = {order, "held-out hand MPVPE wrist_copy " + fmt("%.3f", copy.mpvpe_hands) + " > frozen " +
                             fmt("%.3f", frozen.mpvpe_hands) + " > cham " + fmt("%.3f", cham.mpvpe_hands) + " mm"};
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posefuse acceptance checks"};
  std::vector<int> expect_fail;
  std::vector<int> only;
  std::string cli = POSEFUSE_CLI;
  app.add_option("--expect-fail", expect_fail, "criteria reported but not counted toward the exit code");
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--cli", cli, "path of the posefuse binary");
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  std::map<int, std::pair<std::string, Outcome>> results;
  auto record = [&](int k, const std::string& name, const Outcome& o) {
    results[k] = {name, o};
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << k << ". " << name << ": " << o.detail << std::endl;
  };

  if (wanted(1)) record(1, "zero-init identity", zero_init_identity());
  if (wanted(3)) record(3, "gradient suite", gradient_suite());
  if (wanted(4)) record(4, "kabsch optimality", kabsch_optimality());
  if (wanted(5)) record(5, "kinematics and skinning invariants", kinematics_invariants());
  if (wanted(8)) record(8, "shape expressiveness", shape_expressiveness());
  if (wanted(9)) record(9, "seam smoothing monotonicity", seam_monotonicity());
  if (wanted(10)) record(10, "metric contracts", metric_contracts());
  if (wanted(11)) record(11, "determinism", determinism(cli));
  if (wanted(2) || wanted(6) || wanted(7)) {
    const ExperimentResult e = desk_experiment();
    if (wanted(2)) record(2, "frozen-backbone integrity", e.integrity);
    if (wanted(6)) record(6, "desk-scale CHAM experiment", e.core);
    if (wanted(7)) record(7, "strategy ordering", e.ordering);
  }

  std::cout << "\nsummary\n";
  int unexpected = 0;
  for (const auto& [k, r] : results) {
    const bool tolerated = std::find(expect_fail.begin(), expect_fail.end(), k) != expect_fail.end();
    std::cout << (r.second.pass ? "PASS" : "FAIL") << "  " << k << ". " << r.first
              << (!r.second.pass && tolerated ? " (known failure)" : "") << "\n";
    if (!r.second.pass && !tolerated) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
