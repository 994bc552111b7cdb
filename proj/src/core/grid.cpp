#include "depthlab/core/grid.hpp"

#include <algorithm>
#include <cmath>

namespace depthlab {
namespace {

void check_rect(int h, int w, const CropRect& rect) {
  if (rect.side <= 0) throw OutOfBoundsError("crop side must be positive");
  if (rect.x0 < 0 || rect.y0 < 0 || rect.x0 + rect.side > w || rect.y0 + rect.side > h) {
    throw OutOfBoundsError("crop rect exceeds grid extents");
  }
}

// Corner-aligned source coordinate for output index i of n_out samples over
// n_in source samples. n_out == 1 degenerates to the source midpoint.
inline double sample_coord(int i, int n_out, int n_in) {
  if (n_out == 1) return 0.5 * (n_in - 1);
  return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
}

struct LinearTap {
  int lo;
  int hi;
  double w_hi;  // weight of hi; lo gets (1 - w_hi)
};

LinearTap make_tap(double coord, int n_in) {
  LinearTap t;
  double fl = std::floor(coord);
  t.lo = static_cast<int>(fl);
  if (t.lo >= n_in - 1) {  // clamp exact top corner
    t.lo = n_in - 1;
    t.hi = n_in - 1;
    t.w_hi = 0.0;
  } else {
    t.hi = t.lo + 1;
    t.w_hi = coord - fl;
  }
  return t;
}

}  // namespace

DepthGrid crop(const DepthGrid& grid, const CropRect& rect) {
  check_rect(grid.height(), grid.width(), rect);
  DepthGrid out(rect.side, rect.side);
  for (int i = 0; i < rect.side; ++i) {
    for (int j = 0; j < rect.side; ++j) {
      out.at(i, j) = grid.at(rect.y0 + i, rect.x0 + j);
      out.set_valid(i, j, grid.is_valid(rect.y0 + i, rect.x0 + j));
    }
  }
  return out;
}

ImageGrid crop(const ImageGrid& grid, const CropRect& rect) {
  check_rect(grid.height(), grid.width(), rect);
  ImageGrid out(rect.side, rect.side, grid.channels());
  for (int c = 0; c < grid.channels(); ++c) {
    for (int i = 0; i < rect.side; ++i) {
      for (int j = 0; j < rect.side; ++j) {
        out.at(c, i, j) = grid.at(c, rect.y0 + i, rect.x0 + j);
      }
    }
  }
  return out;
}

DepthGrid resize_bilinear(const DepthGrid& grid, int new_h, int new_w) {
  if (grid.empty()) throw EmptyGridError("resize_bilinear: empty input");
  if (new_h < 1 || new_w < 1) throw EmptyGridError("resize_bilinear: output dims must be >= 1");
  DepthGrid out(new_h, new_w);
  std::vector<LinearTap> xs(new_w);
  for (int j = 0; j < new_w; ++j) xs[j] = make_tap(sample_coord(j, new_w, grid.width()), grid.width());
  for (int i = 0; i < new_h; ++i) {
    const LinearTap ty = make_tap(sample_coord(i, new_h, grid.height()), grid.height());
    for (int j = 0; j < new_w; ++j) {
      const LinearTap& tx = xs[j];
      const double w00 = (1.0 - ty.w_hi) * (1.0 - tx.w_hi);
      const double w01 = (1.0 - ty.w_hi) * tx.w_hi;
      const double w10 = ty.w_hi * (1.0 - tx.w_hi);
      const double w11 = ty.w_hi * tx.w_hi;
      bool ok = true;
      if (w00 > 0.0) ok &= grid.is_valid(ty.lo, tx.lo);
      if (w01 > 0.0) ok &= grid.is_valid(ty.lo, tx.hi);
      if (w10 > 0.0) ok &= grid.is_valid(ty.hi, tx.lo);
      if (w11 > 0.0) ok &= grid.is_valid(ty.hi, tx.hi);
      if (ok) {
        out.at(i, j) = w00 * grid.at(ty.lo, tx.lo) + w01 * grid.at(ty.lo, tx.hi) +
                       w10 * grid.at(ty.hi, tx.lo) + w11 * grid.at(ty.hi, tx.hi);
      } else {
        out.at(i, j) = 0.0;
        out.set_valid(i, j, false);
      }
    }
  }
  return out;
}

ImageGrid resize_bilinear(const ImageGrid& grid, int new_h, int new_w) {
  if (grid.values().empty()) throw EmptyGridError("resize_bilinear: empty input");
  if (new_h < 1 || new_w < 1) throw EmptyGridError("resize_bilinear: output dims must be >= 1");
  ImageGrid out(new_h, new_w, grid.channels());
  std::vector<LinearTap> xs(new_w);
  for (int j = 0; j < new_w; ++j) xs[j] = make_tap(sample_coord(j, new_w, grid.width()), grid.width());
  for (int c = 0; c < grid.channels(); ++c) {
    for (int i = 0; i < new_h; ++i) {
      const LinearTap ty = make_tap(sample_coord(i, new_h, grid.height()), grid.height());
      for (int j = 0; j < new_w; ++j) {
        const LinearTap& tx = xs[j];
        out.at(c, i, j) = (1.0 - ty.w_hi) * ((1.0 - tx.w_hi) * grid.at(c, ty.lo, tx.lo) +
                                             tx.w_hi * grid.at(c, ty.lo, tx.hi)) +
                          ty.w_hi * ((1.0 - tx.w_hi) * grid.at(c, ty.hi, tx.lo) +
                                     tx.w_hi * grid.at(c, ty.hi, tx.hi));
      }
    }
  }
  return out;
}

DepthGrid resize_nearest(const DepthGrid& grid, int new_h, int new_w) {
  if (grid.empty()) throw EmptyGridError("resize_nearest: empty input");
  if (new_h < 1 || new_w < 1) throw EmptyGridError("resize_nearest: output dims must be >= 1");
  DepthGrid out(new_h, new_w);
  for (int i = 0; i < new_h; ++i) {
    int y = static_cast<int>(std::lround(sample_coord(i, new_h, grid.height())));
    y = std::clamp(y, 0, grid.height() - 1);
    for (int j = 0; j < new_w; ++j) {
      int x = static_cast<int>(std::lround(sample_coord(j, new_w, grid.width())));
      x = std::clamp(x, 0, grid.width() - 1);
      out.at(i, j) = grid.at(y, x);
      out.set_valid(i, j, grid.is_valid(y, x));
    }
  }
  return out;
}

std::vector<DepthGrid> downsample_pyramid(const DepthGrid& grid, int levels) {
  if (levels < 1) throw TooSmallError("downsample_pyramid: levels must be >= 1");
  {
    int h = grid.height(), w = grid.width();
    for (int k = 1; k < levels; ++k) {
      h /= 2;
      w /= 2;
    }
    if (h < 1 || w < 1) throw TooSmallError("downsample_pyramid: level would have zero area");
  }
  std::vector<DepthGrid> pyr;
  pyr.reserve(levels);
  pyr.push_back(grid);
  for (int k = 1; k < levels; ++k) {
    const DepthGrid& prev = pyr.back();
    DepthGrid next(prev.height() / 2, prev.width() / 2);
    for (int i = 0; i < next.height(); ++i) {
      for (int j = 0; j < next.width(); ++j) {
        double sum = 0.0;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            if (prev.is_valid(2 * i + dy, 2 * j + dx)) {
              sum += prev.at(2 * i + dy, 2 * j + dx);
              ++n;
            }
          }
        }
        if (n > 0) {
          next.at(i, j) = sum / n;
        } else {
          next.at(i, j) = 0.0;
          next.set_valid(i, j, false);
        }
      }
    }
    pyr.push_back(std::move(next));
  }
  return pyr;
}

}  // namespace depthlab
