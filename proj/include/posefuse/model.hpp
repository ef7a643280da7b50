#pragma once

#include "posefuse/common.hpp"
#include "posefuse/mesh.hpp"
#include "posefuse/rigid.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace posefuse {

enum class ModelKind { Body, Hand };

inline const char* model_kind_name(ModelKind k) { return k == ModelKind::Body ? "body" : "hand"; }

/// Body vertices that stand in for one hand of the hand model.
struct HandRegion {
  std::vector<int> vertex_indices;  // body vertex ids
  std::vector<int> boundary_ring;   // body vertex ids, ordered around the wrist
  std::vector<int> correspondence;  // hand-model vertex id for each entry of vertex_indices
  /// 5 x |vertex_indices| regressor: wrist, index, middle, ring, pinky MCP.
  Eigen::MatrixXd marker_weights;
};

struct ModelSpec {
  ModelKind kind = ModelKind::Body;
  std::vector<int> parents;  // parents[0] == -1
  Points3d template_vertices;
  Faces faces;
  Eigen::MatrixXd joint_regressor;   // J x V
  Eigen::MatrixXd skinning_weights;  // V x J
  Eigen::MatrixXd shape_basis;       // 3V x B, row 3 * v + axis
  std::map<std::string, int> named_joints;
  std::array<HandRegion, 2> hand_regions;  // body only, indexed by Side

  int joint_count() const { return static_cast<int>(parents.size()); }
  int vertex_count() const { return static_cast<int>(template_vertices.rows()); }
  int shape_dim() const { return static_cast<int>(shape_basis.cols()); }
  /// Throws UnknownJoint.
  int joint(const std::string& name) const;
  const HandRegion& region(Side s) const { return hand_regions[static_cast<std::size_t>(side_index(s))]; }
};

inline constexpr const char* kSpecSchema = "posefuse-spec-v1";

/// Hand joint indices of the wrist and the four MCPs used for alignment.
inline constexpr std::array<int, 5> kHandAnchorJoints = {0, 1, 4, 10, 7};
inline constexpr std::array<const char*, 5> kHandAnchorNames = {"wrist", "index_mcp", "middle_mcp", "ring_mcp",
                                                                 "pinky_mcp"};

template <typename Scalar>
struct PoseStateT {
  Mat3<Scalar> root_orientation = Mat3<Scalar>::Identity();
  Vec3<Scalar> root_translation = Vec3<Scalar>::Zero();
  std::vector<Mat3<Scalar>> local_rotations;  // J - 1 entries, joint j at j - 1
  VecX<Scalar> shape;
};

using PoseState = PoseStateT<double>;

PoseState zero_pose(const ModelSpec& spec);

struct Camera {
  Eigen::Vector2d focal{450.0, 450.0};
  Eigen::Vector2d principal{144.0, 192.0};
};

/// Throws InvariantViolation naming the first failing field.
void validate_spec(const ModelSpec& spec);

ModelSpec load_model_spec(const std::string& path);
void save_model_spec(const ModelSpec& spec, const std::string& path);
std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

/// Bit-level hash of every spec field.
std::uint64_t spec_hash(const ModelSpec& spec);

struct ShapedModel {
  Points3d vertices;
  Points3d rest_joints;
};

/// Throws DimMismatch when beta has the wrong length.
ShapedModel shape_mesh(const ModelSpec& spec, const Eigen::VectorXd& beta);

/// Points that are affine in beta: base + basis * beta (basis is 3P x B, row 3p + axis).
struct LinearPoints {
  Points3d base;
  Eigen::MatrixXd basis;

  int size() const { return static_cast<int>(base.rows()); }

  template <typename Scalar>
  Points3<Scalar> eval(const VecX<Scalar>& beta) const {
    Points3<Scalar> out(base.rows(), 3);
    for (Eigen::Index p = 0; p < base.rows(); ++p) {
      for (int c = 0; c < 3; ++c) {
        Scalar v = Scalar(base(p, c));
        for (Eigen::Index b = 0; b < basis.cols(); ++b) {
          const double w = basis(3 * p + c, b);
          if (w != 0.0) v += w * beta(b);
        }
        out(p, c) = v;
      }
    }
    return out;
  }
};

/// rows(weights) points regressed from the shaped vertices.
LinearPoints regress_points(const ModelSpec& spec, const Eigen::MatrixXd& weights);

/// Regressed points skinned with the blend of their source vertices' weights.
/// Skinning is linear, so posed = sum_j R_j * P_j(beta) + (t_j - R_j rest_j) * S_j,
/// exact for any regressor.
struct SkinnedPoints {
  struct Term {
    int joint;
    double weight;
    Vec3<double> base;
    Eigen::Matrix<double, 3, Eigen::Dynamic> basis;
  };
  std::vector<std::vector<Term>> terms;  // per point

  int size() const { return static_cast<int>(terms.size()); }
};

SkinnedPoints skinned_points(const ModelSpec& spec, const Eigen::MatrixXd& weights);

/// Global rigid transform of every joint plus the rest joints they were built from.
template <typename Scalar>
struct Skeleton {
  std::vector<RigidTransform<Scalar>> global;
  Points3<Scalar> rest_joints;

  /// Skinning transform G_j * (I, rest_j)^-1.
  RigidTransform<Scalar> skinning(int j) const {
    RigidTransform<Scalar> a = global[static_cast<std::size_t>(j)];
    const Vec3<Scalar> r = rest_joints.row(j).transpose();
    a.translation -= a.rotation * r;
    return a;
  }

  Points3<Scalar> joints() const {
    Points3<Scalar> out(static_cast<Eigen::Index>(global.size()), 3);
    for (std::size_t j = 0; j < global.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = global[j].translation.transpose();
    return out;
  }
};

template <typename Scalar>
Skeleton<Scalar> forward_kinematics(const std::vector<int>& parents, const PoseStateT<Scalar>& pose,
                                    const Points3<Scalar>& rest_joints) {
  const std::size_t nj = parents.size();
  if (pose.local_rotations.size() + 1 != nj || static_cast<std::size_t>(rest_joints.rows()) != nj) {
    throw Error(Errc::DimMismatch, "pose joint count");
  }
  Skeleton<Scalar> sk;
  sk.rest_joints = rest_joints;
  sk.global.resize(nj);
  sk.global[0].rotation = pose.root_orientation;
  sk.global[0].translation = rest_joints.row(0).transpose() + pose.root_translation;
  for (std::size_t j = 1; j < nj; ++j) {
    const auto& parent = sk.global[static_cast<std::size_t>(parents[j])];
    const Vec3<Scalar> offset = (rest_joints.row(static_cast<Eigen::Index>(j)) -
                                 rest_joints.row(parents[j]))
                                    .transpose();
    sk.global[j].rotation = parent.rotation * pose.local_rotations[j - 1];
    sk.global[j].translation = parent.rotation * offset + parent.translation;
  }
  return sk;
}

inline Skeleton<double> forward_kinematics(const ModelSpec& spec, const PoseState& pose,
                                           const Points3d& rest_joints) {
  return forward_kinematics<double>(spec.parents, pose, rest_joints);
}

/// Product of rotations along the root-to-joint chain. Throws UnknownJoint.
Matrix3 global_joint_orientation(const ModelSpec& spec, const PoseState& pose, const std::string& joint_name);

template <typename Scalar>
Mat3<Scalar> global_orientation(const std::vector<int>& parents, const PoseStateT<Scalar>& pose, int joint) {
  Mat3<Scalar> r = Mat3<Scalar>::Identity();
  for (int j = joint; j > 0; j = parents[static_cast<std::size_t>(j)]) {
    r = pose.local_rotations[static_cast<std::size_t>(j - 1)] * r;
  }
  return pose.root_orientation * r;
}

/// Linear blend skinning of the shaped vertices.
Points3d skin_vertices(const ModelSpec& spec, const Points3d& shaped_vertices, const Skeleton<double>& skeleton);

/// Throws DimMismatch.
Mesh skin_mesh(const ModelSpec& spec, const Points3d& shaped_vertices, const Skeleton<double>& skeleton);

template <typename Scalar>
Points3<Scalar> pose_skinned_points(const SkinnedPoints& pts, const Skeleton<Scalar>& sk,
                                    const VecX<Scalar>& beta) {
  Points3<Scalar> out(pts.size(), 3);
  std::vector<char> have(sk.global.size(), 0);
  std::vector<RigidTransform<Scalar>> a(sk.global.size());
  for (int p = 0; p < pts.size(); ++p) {
    Vec3<Scalar> acc = Vec3<Scalar>::Zero();
    for (const auto& t : pts.terms[static_cast<std::size_t>(p)]) {
      const std::size_t j = static_cast<std::size_t>(t.joint);
      if (!have[j]) {
        a[j] = sk.skinning(t.joint);
        have[j] = 1;
      }
      Vec3<Scalar> local = t.base.template cast<Scalar>();
      if (t.basis.cols() > 0) local += t.basis.template cast<Scalar>() * beta;
      acc += a[j].rotation * local + a[j].translation * t.weight;
    }
    out.row(p) = acc.transpose();
  }
  return out;
}

/// Posed joint positions (shape + FK).
Points3d keypoints_3d(const ModelSpec& spec, const PoseState& pose);

/// Pinhole projection. Throws BehindCamera with the first offending index.
template <typename Scalar>
Points2<Scalar> project_points(const Camera& cam, const Points3<Scalar>& pts) {
  Points2<Scalar> out(pts.rows(), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    if (!(value_of(pts(i, 2)) > 1e-6)) throw Error(Errc::BehindCamera, "", static_cast<long>(i));
    const Scalar inv = Scalar(1.0) / pts(i, 2);
    out(i, 0) = cam.focal.x() * pts(i, 0) * inv + cam.principal.x();
    out(i, 1) = cam.focal.y() * pts(i, 1) * inv + cam.principal.y();
  }
  return out;
}

}  // namespace posefuse
