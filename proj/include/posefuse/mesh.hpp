#pragma once

#include "posefuse/common.hpp"

#include <string>
#include <vector>

namespace posefuse {

struct Mesh {
  Points3d vertices;
  Faces faces;
  std::vector<int> boundary_ring;

  int vertex_count() const { return static_cast<int>(vertices.rows()); }
  int face_count() const { return static_cast<int>(faces.rows()); }
};

/// Throws InvalidDims on out-of-range face indices or a repeated ring index.
void validate_mesh(const Mesh& mesh);

/// Sorted, de-duplicated one-ring neighbors of every vertex.
std::vector<std::vector<int>> vertex_adjacency(const Faces& faces, int vertex_count);

/// `seeds` grown by `band` rings of edge neighbors; sorted.
std::vector<int> grow_region(const std::vector<std::vector<int>>& adjacency, const std::vector<int>& seeds,
                             int band);

/// Uniform Jacobi smoothing restricted to `vertex_set`:
/// v <- v + lambda * (mean(one-ring) - v). Vertices outside the set are copied
/// bit-exactly. Throws IsolatedVertex for a selected vertex without neighbors.
Mesh laplacian_smooth(const Mesh& mesh, const std::vector<int>& vertex_set, double lambda, int iters);

/// Same update with a precomputed adjacency.
void laplacian_smooth_inplace(Points3d& vertices, const std::vector<std::vector<int>>& adjacency,
                              const std::vector<int>& vertex_set, double lambda, int iters);

/// ASCII Wavefront OBJ, `v` and triangular `f` records only.
void write_obj(const Mesh& mesh, const std::string& path);
std::string format_obj(const Mesh& mesh);
Mesh read_obj(const std::string& path);
Mesh parse_obj(const std::string& text);

}  // namespace posefuse
