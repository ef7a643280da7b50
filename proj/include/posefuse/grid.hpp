#pragma once

#include "posefuse/common.hpp"

#include <vector>

namespace posefuse {

/// 2x3 affine map from grid (or crop) coordinates to full-image pixels.
/// Grid coordinates put the center of cell (row r, col c) at (c + 0.5, r + 0.5).
struct Affine2D {
  Eigen::Matrix<double, 2, 3> a = (Eigen::Matrix<double, 2, 3>() << 1, 0, 0, 0, 1, 0).finished();

  /// Axis-aligned map: image = origin + scale * grid.
  static Affine2D scale_offset(double sx, double sy, double ox, double oy);

  Vec2<double> operator()(const Vec2<double>& p) const { return a.leftCols<2>() * p + a.col(2); }
  double determinant() const { return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0); }
  /// Throws InvalidDims when |det| <= 1e-12.
  Affine2D inverse() const;
  bool operator==(const Affine2D& o) const { return a == o.a; }
};

/// H x W x C feature tokens; data row index is r * w + c.
struct TokenGrid {
  int h = 0;
  int w = 0;
  int channels = 0;
  Eigen::MatrixXd data;  // (h*w) x channels
  Affine2D affine;

  TokenGrid() = default;
  TokenGrid(int h_, int w_, int c_, const Affine2D& aff)
      : h(h_), w(w_), channels(c_), data(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h_) * w_, c_)),
        affine(aff) {}

  int cells() const { return h * w; }
  bool same_shape(const TokenGrid& o) const { return h == o.h && w == o.w && channels == o.channels; }
};

/// Sparse bilinear sampling matrix from a source grid to target cells.
/// Each target cell carries up to four (source cell, weight) taps, or none when
/// its center falls outside the source footprint.
class ResampleMap {
 public:
  ResampleMap(int src_h, int src_w, const Affine2D& src_affine, int out_h, int out_w,
              const Affine2D& target_affine);

  int out_cells() const { return out_h_ * out_w_; }
  int src_cells() const { return src_h_ * src_w_; }
  bool inside(int cell) const { return inside_[static_cast<std::size_t>(cell)] != 0; }

  /// out = S src, with `fill` in cells outside the footprint.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& src, double fill) const;
  /// g_src = S^T g_out (fill cells contribute nothing).
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& g_out) const;

 private:
  struct Tap {
    int index;
    double weight;
  };
  int src_h_, src_w_, out_h_, out_w_;
  std::vector<Tap> taps_;      // 4 per output cell
  std::vector<char> inside_;   // per output cell
};

/// Bilinear resampling of `grid` onto the cells of `target_affine`; cells that
/// map outside the source get `fill`. Throws InvalidDims on empty output.
TokenGrid resample_grid(const TokenGrid& grid, const Affine2D& target_affine, int out_h, int out_w,
                        double fill);

/// Sinusoidal encoding of normalized full-image coordinates, evaluated at the
/// cell centers of a grid placed by `affine`. Channel 4i..4i+3 holds
/// sin/cos of the x and y coordinate at frequency i.
TokenGrid positional_encoding_2d(int h, int w, int channels, const Affine2D& affine, double image_w,
                                 double image_h);

/// Angular frequency used for group `i` of `groups`.
double positional_frequency(int i, int groups);

}  // namespace posefuse
