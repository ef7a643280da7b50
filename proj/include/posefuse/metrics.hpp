#pragma once

#include "posefuse/common.hpp"
#include "posefuse/mesh.hpp"

#include <vector>

namespace posefuse {

/// Mean vertex distance in mm after moving each mesh's alignment joint to the origin.
/// Throws DimMismatch.
double mpvpe(const Points3d& pred, const Points3d& gt, const Vector3& align_pred, const Vector3& align_gt);

inline double mpvpe(const Mesh& pred, const Mesh& gt, const Vector3& align_pred, const Vector3& align_gt) {
  return mpvpe(pred.vertices, gt.vertices, align_pred, align_gt);
}

/// |(pL - pR) - (gL - gR)| in mm.
double mrrpe(const Vector3& pred_left, const Vector3& pred_right, const Vector3& gt_left, const Vector3& gt_right);

/// Mean vertex distance in mm after similarity Procrustes alignment of pred onto gt.
/// Throws DegenerateConfiguration.
double pa_mpvpe(const Points3d& pred, const Points3d& gt);

inline double pa_mpvpe(const Mesh& pred, const Mesh& gt) { return pa_mpvpe(pred.vertices, gt.vertices); }

/// Rows of `pts` at `ids`.
Points3d gather_rows(const Points3d& pts, const std::vector<int>& ids);

}  // namespace posefuse
