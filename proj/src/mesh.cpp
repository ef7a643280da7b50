#include "posefuse/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace posefuse {

void validate_mesh(const Mesh& mesh) {
  const int v = mesh.vertex_count();
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int idx = mesh.faces(f, k);
      if (idx < 0 || idx >= v) throw Error(Errc::InvalidDims, "faces", static_cast<long>(f));
    }
  }
  std::set<int> seen;
  for (int idx : mesh.boundary_ring) {
    if (idx < 0 || idx >= v || !seen.insert(idx).second) {
      throw Error(Errc::InvalidDims, "boundary_ring", idx);
    }
  }
}

std::vector<std::vector<int>> vertex_adjacency(const Faces& faces, int vertex_count) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(vertex_count));
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = faces(f, k);
      const int b = faces(f, (k + 1) % 3);
      if (a < 0 || b < 0 || a >= vertex_count || b >= vertex_count) {
        throw Error(Errc::InvalidDims, "faces", static_cast<long>(f));
      }
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
  }
  for (auto& n : adj) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return adj;
}

std::vector<int> grow_region(const std::vector<std::vector<int>>& adjacency, const std::vector<int>& seeds,
                             int band) {
  std::set<int> region(seeds.begin(), seeds.end());
  std::vector<int> frontier(seeds.begin(), seeds.end());
  for (int b = 0; b < band; ++b) {
    std::vector<int> next;
    for (int v : frontier) {
      for (int n : adjacency[static_cast<std::size_t>(v)]) {
        if (region.insert(n).second) next.push_back(n);
      }
    }
    frontier = std::move(next);
  }
  return {region.begin(), region.end()};
}

void laplacian_smooth_inplace(Points3d& vertices, const std::vector<std::vector<int>>& adjacency,
                              const std::vector<int>& vertex_set, double lambda, int iters) {
  for (int v : vertex_set) {
    if (v < 0 || v >= vertices.rows()) throw Error(Errc::InvalidDims, "vertex_set", v);
    if (adjacency[static_cast<std::size_t>(v)].empty()) throw Error(Errc::IsolatedVertex, "", v);
  }
  std::vector<Vector3> updated(vertex_set.size());
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < vertex_set.size(); ++i) {
      const int v = vertex_set[i];
      const auto& ring = adjacency[static_cast<std::size_t>(v)];
      Vector3 mean = Vector3::Zero();
      for (int n : ring) mean += vertices.row(n).transpose();
      mean /= static_cast<double>(ring.size());
      const Vector3 p = vertices.row(v).transpose();
      updated[i] = p + lambda * (mean - p);
    }
    for (std::size_t i = 0; i < vertex_set.size(); ++i) vertices.row(vertex_set[i]) = updated[i].transpose();
  }
}

Mesh laplacian_smooth(const Mesh& mesh, const std::vector<int>& vertex_set, double lambda, int iters) {
  Mesh out = mesh;
  if (iters <= 0) return out;
  const auto adj = vertex_adjacency(mesh.faces, mesh.vertex_count());
  laplacian_smooth_inplace(out.vertices, adj, vertex_set, lambda, iters);
  return out;
}

std::string format_obj(const Mesh& mesh) {
  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.vertex_count()) * 40 + static_cast<std::size_t>(mesh.face_count()) * 20);
  char buf[128];
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", mesh.vertices(i, 0), mesh.vertices(i, 1),
                  mesh.vertices(i, 2));
    out += buf;
  }
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", mesh.faces(f, 0) + 1, mesh.faces(f, 1) + 1,
                  mesh.faces(f, 2) + 1);
    out += buf;
  }
  return out;
}

void write_obj(const Mesh& mesh, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, path);
  f << format_obj(mesh);
  if (!f) throw Error(Errc::IoError, path);
}

Mesh parse_obj(const std::string& text) {
  std::istringstream in(text);
  std::vector<Vector3> verts;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vector3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw Error(Errc::ParseError, "vertex", lineno);
      verts.push_back(p);
    } else if (tag == "f") {
      Eigen::Vector3i f;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        if (!(ls >> tok)) throw Error(Errc::ParseError, "face", lineno);
        // "i", "i/t", "i/t/n" all start with the vertex index.
        f(k) = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      std::string extra;
      if (ls >> extra) throw Error(Errc::ParseError, "non-triangular face", lineno);
      faces.push_back(f);
    }
  }
  Mesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) mesh.faces.row(static_cast<Eigen::Index>(i)) = faces[i].transpose();
  validate_mesh(mesh);
  return mesh;
}

Mesh read_obj(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_obj(ss.str());
}

}  // namespace posefuse
