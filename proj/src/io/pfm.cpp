#include "depthlab/io/pfm.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace depthlab::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

float byteswap_f32(float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  u = __builtin_bswap32(u);
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace

void write_pfm(const DepthGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "Pf\n" << grid.width() << " " << grid.height() << "\n" << "-1.0" << "\n";
  std::vector<float> row(grid.width());
  for (int i = grid.height() - 1; i >= 0; --i) {
    for (int j = 0; j < grid.width(); ++j) {
      row[j] = grid.is_valid(i, j) ? static_cast<float>(grid.at(i, j))
                                   : std::numeric_limits<float>::quiet_NaN();
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
  }
  if (!out) throw IoError("short write: " + path);
}

DepthGrid read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw IoError("not a grayscale PFM: " + path);
  int w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  if (!in || w <= 0 || h <= 0 || scale == 0.0) throw IoError("bad PFM header: " + path);
  in.get();  // single whitespace byte after the scale line
  const bool little = scale < 0.0;
  DepthGrid grid(h, w);
  std::vector<float> row(w);
  for (int i = h - 1; i >= 0; --i) {
    in.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!in) throw IoError("truncated PFM payload: " + path);
    for (int j = 0; j < w; ++j) {
      float v = little ? row[j] : byteswap_f32(row[j]);
      if (std::isnan(v)) {
        grid.at(i, j) = 0.0;
        grid.set_valid(i, j, false);
      } else {
        grid.at(i, j) = static_cast<double>(v);
      }
    }
  }
  return grid;
}

}  // namespace depthlab::io
