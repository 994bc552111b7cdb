#pragma once

#include <string>

#include "depthlab/core/grid.hpp"

namespace depthlab::io {

// 16-bit big-endian binary PGM (P5) for quantized depth. Values are mapped
// linearly from [lo, hi] onto [0, 65535] with clamping; the reader inverts
// the same mapping, so a round trip is exact up to one quantization step.
// Invalid pixels are written as 0.
void write_pgm16(const DepthGrid& grid, const std::string& path, double lo, double hi);
DepthGrid read_pgm16(const std::string& path, double lo, double hi);

// 8-bit binary PPM (P6). Image values are clamped to [0, 1] and scaled to
// [0, 255]. Grayscale images are replicated across the three channels on
// write; the reader always returns a 3-channel image.
void write_ppm(const ImageGrid& image, const std::string& path);
ImageGrid read_ppm(const std::string& path);

}  // namespace depthlab::io
