#pragma once

#include <cstdint>
#include <vector>

#include "depthlab/core/error.hpp"

namespace depthlab {

// Square region in source-grid pixel coordinates. (x0, y0) is the top-left
// corner, `side` the edge length. Row-major (row, col) = (y, x) indexing is
// used across the whole library.
struct CropRect {
  int x0 = 0;
  int y0 = 0;
  int side = 0;

  bool operator==(const CropRect&) const = default;
};

// Dense 2-D field of relative depth (or prediction) values with a per-pixel
// validity mask. Values at valid pixels are finite; invalid pixels hold 0
// internally and are encoded as NaN only at the PFM file boundary.
class DepthGrid {
 public:
  DepthGrid() = default;
  DepthGrid(int height, int width, double fill = 0.0, bool valid = true)
      : height_(height),
        width_(width),
        values_(static_cast<std::size_t>(height) * width, fill),
        valid_(static_cast<std::size_t>(height) * width, valid ? 1 : 0) {
    if (height <= 0 || width <= 0) throw EmptyGridError("DepthGrid dims must be positive");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(int y, int x) { return values_[idx(y, x)]; }
  double at(int y, int x) const { return values_[idx(y, x)]; }
  bool is_valid(int y, int x) const { return valid_[idx(y, x)] != 0; }
  void set_valid(int y, int x, bool v) { valid_[idx(y, x)] = v ? 1 : 0; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<std::uint8_t>& valid() { return valid_; }
  const std::vector<std::uint8_t>& valid() const { return valid_; }

  int valid_count() const {
    int n = 0;
    for (auto v : valid_) n += v != 0;
    return n;
  }

  std::size_t idx(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

// RGB or grayscale image with channel-planar storage ([c][y][x]) and values
// in [0, 1]. No validity mask.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int height, int width, int channels, double fill = 0.0)
      : height_(height),
        width_(width),
        channels_(channels),
        values_(static_cast<std::size_t>(channels) * height * width, fill) {
    if (height <= 0 || width <= 0) throw EmptyGridError("ImageGrid dims must be positive");
    if (channels != 1 && channels != 3) throw ShapeMismatchError("ImageGrid channels must be 1 or 3");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }

  double& at(int c, int y, int x) { return values_[idx(c, y, x)]; }
  double at(int c, int y, int x) const { return values_[idx(c, y, x)]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t idx(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

// Channel-planar feature map (no validity, no range constraint). Used for
// the feature-alignment loss.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int height, int width, int channels, double fill = 0.0)
      : height_(height),
        width_(width),
        channels_(channels),
        values_(static_cast<std::size_t>(channels) * height * width, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return values_.empty(); }

  double& at(int c, int y, int x) { return values_[idx(c, y, x)]; }
  double at(int c, int y, int x) const { return values_[idx(c, y, x)]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t idx(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

// --- Grid operations. All pure; inputs are never mutated. ---

DepthGrid crop(const DepthGrid& grid, const CropRect& rect);
ImageGrid crop(const ImageGrid& grid, const CropRect& rect);

// Bilinear resize with corner-aligned sampling: output corners map onto
// input corners. An output depth pixel is valid only if every source pixel
// with nonzero weight is valid.
DepthGrid resize_bilinear(const DepthGrid& grid, int new_h, int new_w);
ImageGrid resize_bilinear(const ImageGrid& grid, int new_h, int new_w);

// Nearest-neighbor resize (masks and other non-interpolable fields).
DepthGrid resize_nearest(const DepthGrid& grid, int new_h, int new_w);

// Level 0 is the input; level k halves each dimension (floor) via a 2x2
// mean over valid pixels. A pooled pixel is valid iff at least one
// contributing pixel is valid.
std::vector<DepthGrid> downsample_pyramid(const DepthGrid& grid, int levels);

}  // namespace depthlab
