#include "posefuse/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace posefuse {

Affine2D Affine2D::scale_offset(double sx, double sy, double ox, double oy) {
  Affine2D out;
  out.a << sx, 0.0, ox, 0.0, sy, oy;
  return out;
}

Affine2D Affine2D::inverse() const {
  const double det = determinant();
  if (!(std::abs(det) > 1e-12)) throw Error(Errc::InvalidDims, "affine not invertible");
  Eigen::Matrix2d lin = a.leftCols<2>();
  Eigen::Matrix2d inv;
  inv << lin(1, 1), -lin(0, 1), -lin(1, 0), lin(0, 0);
  inv /= det;
  Affine2D out;
  out.a.leftCols<2>() = inv;
  out.a.col(2) = -(inv * a.col(2));
  return out;
}

ResampleMap::ResampleMap(int src_h, int src_w, const Affine2D& src_affine, int out_h, int out_w,
                         const Affine2D& target_affine)
    : src_h_(src_h), src_w_(src_w), out_h_(out_h), out_w_(out_w) {
  if (out_h <= 0 || out_w <= 0) throw Error(Errc::InvalidDims, "empty output grid");
  if (src_h <= 0 || src_w <= 0) throw Error(Errc::InvalidDims, "empty source grid");
  const Affine2D to_src = src_affine.inverse();
  const std::size_t n = static_cast<std::size_t>(out_h) * static_cast<std::size_t>(out_w);
  taps_.assign(4 * n, Tap{0, 0.0});
  inside_.assign(n, 0);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r * out_w + c);
      const Vec2<double> s = to_src(target_affine(Vec2<double>(c + 0.5, r + 0.5)));
      if (!(s.x() >= 0.0 && s.x() <= src_w && s.y() >= 0.0 && s.y() <= src_h)) continue;
      inside_[cell] = 1;
      const double fx = std::clamp(s.x() - 0.5, 0.0, static_cast<double>(src_w - 1));
      const double fy = std::clamp(s.y() - 0.5, 0.0, static_cast<double>(src_h - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int y0 = static_cast<int>(std::floor(fy));
      const int x1 = std::min(x0 + 1, src_w - 1);
      const int y1 = std::min(y0 + 1, src_h - 1);
      const double tx = fx - x0;
      const double ty = fy - y0;
      Tap* t = &taps_[4 * cell];
      t[0] = {y0 * src_w + x0, (1.0 - tx) * (1.0 - ty)};
      t[1] = {y0 * src_w + x1, tx * (1.0 - ty)};
      t[2] = {y1 * src_w + x0, (1.0 - tx) * ty};
      t[3] = {y1 * src_w + x1, tx * ty};
    }
  }
}

Eigen::MatrixXd ResampleMap::apply(const Eigen::MatrixXd& src, double fill) const {
  if (src.rows() != src_cells()) throw Error(Errc::DimMismatch, "resample source");
  Eigen::MatrixXd out(out_cells(), src.cols());
  for (int cell = 0; cell < out_cells(); ++cell) {
    if (!inside_[static_cast<std::size_t>(cell)]) {
      out.row(cell).setConstant(fill);
      continue;
    }
    const Tap* t = &taps_[4 * static_cast<std::size_t>(cell)];
    out.row(cell) = t[0].weight * src.row(t[0].index);
    for (int k = 1; k < 4; ++k) {
      if (t[k].weight != 0.0) out.row(cell) += t[k].weight * src.row(t[k].index);
    }
  }
  return out;
}

Eigen::MatrixXd ResampleMap::apply_transpose(const Eigen::MatrixXd& g_out) const {
  if (g_out.rows() != out_cells()) throw Error(Errc::DimMismatch, "resample gradient");
  Eigen::MatrixXd g(src_cells(), g_out.cols());
  g.setZero();
  for (int cell = 0; cell < out_cells(); ++cell) {
    if (!inside_[static_cast<std::size_t>(cell)]) continue;
    const Tap* t = &taps_[4 * static_cast<std::size_t>(cell)];
    for (int k = 0; k < 4; ++k) {
      if (t[k].weight != 0.0) g.row(t[k].index) += t[k].weight * g_out.row(cell);
    }
  }
  return g;
}

TokenGrid resample_grid(const TokenGrid& grid, const Affine2D& target_affine, int out_h, int out_w,
                        double fill) {
  const ResampleMap map(grid.h, grid.w, grid.affine, out_h, out_w, target_affine);
  TokenGrid out;
  out.h = out_h;
  out.w = out_w;
  out.channels = grid.channels;
  out.affine = target_affine;
  out.data = map.apply(grid.data, fill);
  return out;
}

double positional_frequency(int i, int groups) {
  constexpr double kMaxRatio = 32.0;
  if (groups <= 1) return std::numbers::pi;
  return std::numbers::pi * std::pow(kMaxRatio, static_cast<double>(i) / (groups - 1));
}

TokenGrid positional_encoding_2d(int h, int w, int channels, const Affine2D& affine, double image_w,
                                 double image_h) {
  if (h <= 0 || w <= 0 || channels <= 0 || channels % 4 != 0) {
    throw Error(Errc::InvalidDims, "positional encoding needs channels divisible by 4");
  }
  if (!(image_w > 0.0 && image_h > 0.0)) throw Error(Errc::InvalidDims, "image size");
  TokenGrid out(h, w, channels, affine);
  const int groups = channels / 4;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Vec2<double> p = affine(Vec2<double>(c + 0.5, r + 0.5));
      const double u = p.x() / image_w;
      const double v = p.y() / image_h;
      auto row = out.data.row(r * w + c);
      for (int i = 0; i < groups; ++i) {
        const double f = positional_frequency(i, groups);
        row(4 * i + 0) = std::sin(f * u);
        row(4 * i + 1) = std::cos(f * u);
        row(4 * i + 2) = std::sin(f * v);
        row(4 * i + 3) = std::cos(f * v);
      }
    }
  }
  return out;
}

}  // namespace posefuse
