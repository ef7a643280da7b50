#include "posefuse/model.hpp"

#include "posefuse/hash.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace posefuse {

using nlohmann::json;

int ModelSpec::joint(const std::string& name) const {
  const auto it = named_joints.find(name);
  if (it == named_joints.end()) throw Error(Errc::UnknownJoint, name);
  return it->second;
}

PoseState zero_pose(const ModelSpec& spec) {
  PoseState p;
  p.local_rotations.assign(static_cast<std::size_t>(std::max(0, spec.joint_count() - 1)), Matrix3::Identity());
  p.shape = Eigen::VectorXd::Zero(spec.shape_dim());
  return p;
}

namespace {

[[noreturn]] void violation(const std::string& field, long index = -1) {
  throw Error(Errc::InvariantViolation, field, index);
}

void check_stochastic_rows(const Eigen::MatrixXd& m, const std::string& field) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double w = m(r, c);
      if (!std::isfinite(w) || w < 0.0) violation(field, static_cast<long>(r));
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) violation(field, static_cast<long>(r));
  }
}

}  // namespace

void validate_spec(const ModelSpec& spec) {
  const int nj = spec.joint_count();
  const int nv = spec.vertex_count();
  if (nj < 1 || spec.parents[0] != -1) violation("parents");
  for (int j = 1; j < nj; ++j) {
    const int p = spec.parents[static_cast<std::size_t>(j)];
    if (p < 0 || p >= j) violation("parents", j);
  }
  if (nv < 1 || !spec.template_vertices.allFinite()) violation("template_vertices");
  for (Eigen::Index f = 0; f < spec.faces.rows(); ++f)
    for (int k = 0; k < 3; ++k)
      if (spec.faces(f, k) < 0 || spec.faces(f, k) >= nv) violation("faces", static_cast<long>(f));
  if (spec.joint_regressor.rows() != nj || spec.joint_regressor.cols() != nv) violation("joint_regressor");
  check_stochastic_rows(spec.joint_regressor, "joint_regressor");
  if (spec.skinning_weights.rows() != nv || spec.skinning_weights.cols() != nj) violation("skinning_weights");
  check_stochastic_rows(spec.skinning_weights, "skinning_weights");
  if (spec.shape_basis.rows() != 3 * nv || !spec.shape_basis.allFinite()) violation("shape_basis");

  std::set<int> used;
  for (const auto& [name, idx] : spec.named_joints) {
    if (idx < 0 || idx >= nj) violation("named_joints", idx);
    used.insert(idx);
  }
  const std::vector<std::string> required =
      spec.kind == ModelKind::Body
          ? std::vector<std::string>{"pelvis", "left_wrist", "right_wrist"}
          : std::vector<std::string>{"wrist", "index_mcp", "middle_mcp", "ring_mcp", "pinky_mcp"};
  for (const auto& name : required) {
    if (!spec.named_joints.count(name)) violation("named_joints");
  }

  if (spec.kind != ModelKind::Body) return;
  for (const Side side : kSides) {
    const HandRegion& reg = spec.region(side);
    const std::size_t n = reg.vertex_indices.size();
    std::set<int> members;
    for (int v : reg.vertex_indices) {
      if (v < 0 || v >= nv || !members.insert(v).second) violation("hand_regions.vertex_indices", v);
    }
    if (n == 0) violation("hand_regions.vertex_indices");
    if (reg.correspondence.size() != n) violation("hand_regions.correspondence");
    std::vector<char> hit(n, 0);
    for (int c : reg.correspondence) {
      if (c < 0 || static_cast<std::size_t>(c) >= n || hit[static_cast<std::size_t>(c)]) {
        violation("hand_regions.correspondence", c);
      }
      hit[static_cast<std::size_t>(c)] = 1;
    }
    std::set<int> ring;
    for (int v : reg.boundary_ring) {
      if (!members.count(v) || !ring.insert(v).second) violation("hand_regions.boundary_ring", v);
    }
    if (reg.marker_weights.rows() != 5 || reg.marker_weights.cols() != static_cast<Eigen::Index>(n)) {
      violation("hand_regions.marker_weights");
    }
    check_stochastic_rows(reg.marker_weights, "hand_regions.marker_weights");
  }
}

namespace {

template <typename Derived>
json matrix_json(const Eigen::MatrixBase<Derived>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename MatrixT>
MatrixT matrix_from_json(const json& j, Eigen::Index cols, const char* field) {
  if (!j.is_array()) throw Error(Errc::ParseError, field);
  MatrixT m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(Errc::ParseError, field, static_cast<long>(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)].get<typename MatrixT::Scalar>();
    }
  }
  return m;
}

Eigen::Index width(const json& j) { return j.is_array() && !j.empty() && j[0].is_array() ? j[0].size() : 0; }

json spec_json(const ModelSpec& spec) {
  json j;
  j["schema"] = kSpecSchema;
  j["kind"] = model_kind_name(spec.kind);
  j["joint_count"] = spec.joint_count();
  j["parents"] = spec.parents;
  j["template_vertices"] = matrix_json(spec.template_vertices);
  j["faces"] = matrix_json(spec.faces);
  j["rest_joint_regressor"] = matrix_json(spec.joint_regressor);
  j["skinning_weights"] = matrix_json(spec.skinning_weights);
  j["shape_basis_dim"] = spec.shape_dim();
  j["shape_basis"] = matrix_json(spec.shape_basis);
  j["named_joints"] = spec.named_joints;
  if (spec.kind == ModelKind::Body) {
    json regions = json::object();
    for (const Side side : kSides) {
      const HandRegion& r = spec.region(side);
      regions[side_name(side)] = {{"vertex_indices", r.vertex_indices},
                                  {"boundary_ring", r.boundary_ring},
                                  {"correspondence", r.correspondence},
                                  {"marker_weights", matrix_json(r.marker_weights)}};
    }
    j["hand_regions"] = regions;
  }
  return j;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(); }

ModelSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  ModelSpec spec;
  try {
    if (j.at("schema").get<std::string>() != kSpecSchema) throw Error(Errc::ParseError, "schema");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "body") {
      spec.kind = ModelKind::Body;
    } else if (kind == "hand") {
      spec.kind = ModelKind::Hand;
    } else {
      throw Error(Errc::ParseError, "kind");
    }
    spec.parents = j.at("parents").get<std::vector<int>>();
    if (j.at("joint_count").get<int>() != spec.joint_count()) violation("joint_count");
    spec.template_vertices = matrix_from_json<Points3d>(j.at("template_vertices"), 3, "template_vertices");
    spec.faces = matrix_from_json<Faces>(j.at("faces"), 3, "faces");
    const json& reg = j.at("rest_joint_regressor");
    spec.joint_regressor = matrix_from_json<Eigen::MatrixXd>(reg, width(reg), "rest_joint_regressor");
    const json& sw = j.at("skinning_weights");
    spec.skinning_weights = matrix_from_json<Eigen::MatrixXd>(sw, width(sw), "skinning_weights");
    spec.shape_basis =
        matrix_from_json<Eigen::MatrixXd>(j.at("shape_basis"), j.at("shape_basis_dim").get<int>(), "shape_basis");
    spec.named_joints = j.at("named_joints").get<std::map<std::string, int>>();
    if (spec.kind == ModelKind::Body) {
      const json& regions = j.at("hand_regions");
      for (const Side side : kSides) {
        const json& r = regions.at(side_name(side));
        HandRegion& out = spec.hand_regions[static_cast<std::size_t>(side_index(side))];
        out.vertex_indices = r.at("vertex_indices").get<std::vector<int>>();
        out.boundary_ring = r.at("boundary_ring").get<std::vector<int>>();
        out.correspondence = r.at("correspondence").get<std::vector<int>>();
        const json& mw = r.at("marker_weights");
        out.marker_weights = matrix_from_json<Eigen::MatrixXd>(mw, width(mw), "marker_weights");
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  validate_spec(spec);
  return spec;
}

ModelSpec load_model_spec(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, path);
  std::stringstream ss;
  ss << f.rdbuf();
  return spec_from_json(ss.str());
}

void save_model_spec(const ModelSpec& spec, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, path);
  f << spec_to_json(spec);
  if (!f) throw Error(Errc::IoError, path);
}

std::uint64_t spec_hash(const ModelSpec& spec) {
  Fnv1a h;
  h.update_value(static_cast<int>(spec.kind));
  h.update_vector(spec.parents);
  h.update_matrix(spec.template_vertices);
  h.update_matrix(spec.faces);
  h.update_matrix(spec.joint_regressor);
  h.update_matrix(spec.skinning_weights);
  h.update_matrix(spec.shape_basis);
  for (const auto& [name, idx] : spec.named_joints) {
    h.update_string(name);
    h.update_value(idx);
  }
  if (spec.kind == ModelKind::Body) {
    for (const auto& r : spec.hand_regions) {
      h.update_vector(r.vertex_indices);
      h.update_vector(r.boundary_ring);
      h.update_vector(r.correspondence);
      h.update_matrix(r.marker_weights);
    }
  }
  return h.digest();
}

ShapedModel shape_mesh(const ModelSpec& spec, const Eigen::VectorXd& beta) {
  if (beta.size() != spec.shape_dim()) throw Error(Errc::DimMismatch, "beta");
  ShapedModel out;
  out.vertices = spec.template_vertices;
  if (beta.size() > 0) {
    const Eigen::VectorXd offsets = spec.shape_basis * beta;
    out.vertices += Eigen::Map<const Points3d>(offsets.data(), spec.vertex_count(), 3);
  }
  out.rest_joints = spec.joint_regressor * out.vertices;
  return out;
}

LinearPoints regress_points(const ModelSpec& spec, const Eigen::MatrixXd& weights) {
  if (weights.cols() != spec.vertex_count()) throw Error(Errc::DimMismatch, "regressor width");
  LinearPoints out;
  out.base = weights * spec.template_vertices;
  out.basis = Eigen::MatrixXd::Zero(3 * weights.rows(), spec.shape_dim());
  for (Eigen::Index p = 0; p < weights.rows(); ++p) {
    for (Eigen::Index v = 0; v < weights.cols(); ++v) {
      const double w = weights(p, v);
      if (w == 0.0) continue;
      for (int c = 0; c < 3; ++c) out.basis.row(3 * p + c) += w * spec.shape_basis.row(3 * v + c);
    }
  }
  return out;
}

SkinnedPoints skinned_points(const ModelSpec& spec, const Eigen::MatrixXd& weights) {
  if (weights.cols() != spec.vertex_count()) throw Error(Errc::DimMismatch, "regressor width");
  const int nj = spec.joint_count();
  const int nb = spec.shape_dim();
  SkinnedPoints out;
  out.terms.resize(static_cast<std::size_t>(weights.rows()));
  for (Eigen::Index p = 0; p < weights.rows(); ++p) {
    std::vector<SkinnedPoints::Term> terms(static_cast<std::size_t>(nj));
    for (int j = 0; j < nj; ++j) {
      terms[static_cast<std::size_t>(j)] = {j, 0.0, Vector3::Zero(), Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, nb)};
    }
    for (Eigen::Index v = 0; v < weights.cols(); ++v) {
      const double w = weights(p, v);
      if (w == 0.0) continue;
      for (int j = 0; j < nj; ++j) {
        const double ww = w * spec.skinning_weights(v, j);
        if (ww == 0.0) continue;
        auto& t = terms[static_cast<std::size_t>(j)];
        t.weight += ww;
        t.base += ww * spec.template_vertices.row(v).transpose();
        for (int c = 0; c < 3; ++c) t.basis.row(c) += ww * spec.shape_basis.row(3 * v + c);
      }
    }
    for (auto& t : terms) {
      if (t.weight != 0.0) out.terms[static_cast<std::size_t>(p)].push_back(std::move(t));
    }
  }
  return out;
}

Matrix3 global_joint_orientation(const ModelSpec& spec, const PoseState& pose, const std::string& joint_name) {
  return global_orientation<double>(spec.parents, pose, spec.joint(joint_name));
}

Points3d skin_vertices(const ModelSpec& spec, const Points3d& shaped_vertices, const Skeleton<double>& skeleton) {
  const int nj = spec.joint_count();
  if (shaped_vertices.rows() != spec.vertex_count() || static_cast<int>(skeleton.global.size()) != nj) {
    throw Error(Errc::DimMismatch, "skinning inputs");
  }
  std::vector<Rigid> a(static_cast<std::size_t>(nj));
  for (int j = 0; j < nj; ++j) a[static_cast<std::size_t>(j)] = skeleton.skinning(j);
  Points3d out(shaped_vertices.rows(), 3);
  for (Eigen::Index v = 0; v < shaped_vertices.rows(); ++v) {
    const Vector3 p = shaped_vertices.row(v).transpose();
    Matrix3 r = Matrix3::Zero();
    Vector3 t = Vector3::Zero();
    for (int j = 0; j < nj; ++j) {
      const double w = spec.skinning_weights(v, j);
      if (w == 0.0) continue;
      r += w * a[static_cast<std::size_t>(j)].rotation;
      t += w * a[static_cast<std::size_t>(j)].translation;
    }
    out.row(v) = (r * p + t).transpose();
  }
  return out;
}

Mesh skin_mesh(const ModelSpec& spec, const Points3d& shaped_vertices, const Skeleton<double>& skeleton) {
  Mesh m;
  m.vertices = skin_vertices(spec, shaped_vertices, skeleton);
  m.faces = spec.faces;
  return m;
}

Points3d keypoints_3d(const ModelSpec& spec, const PoseState& pose) {
  const ShapedModel shaped = shape_mesh(spec, pose.shape);
  return forward_kinematics(spec, pose, shaped.rest_joints).joints();
}

}  // namespace posefuse
