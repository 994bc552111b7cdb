#include "depthlab/io/pnm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

namespace depthlab::io {
namespace {

// Reads the PNM header tokens after the magic, skipping '#' comments.
int next_header_int(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  return v;
}

}  // namespace

void write_pgm16(const DepthGrid& grid, const std::string& path, double lo, double hi) {
  if (!(hi > lo)) throw IoError("write_pgm16: need hi > lo");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "P5\n" << grid.width() << " " << grid.height() << "\n65535\n";
  const double scale = 65535.0 / (hi - lo);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(grid.width()) * 2);
  for (int i = 0; i < grid.height(); ++i) {
    for (int j = 0; j < grid.width(); ++j) {
      std::uint16_t q = 0;
      if (grid.is_valid(i, j)) {
        double t = (grid.at(i, j) - lo) * scale;
        q = static_cast<std::uint16_t>(std::clamp(std::lround(t), 0L, 65535L));
      }
      row[2 * j] = static_cast<std::uint8_t>(q >> 8);  // big-endian
      row[2 * j + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw IoError("short write: " + path);
}

DepthGrid read_pgm16(const std::string& path, double lo, double hi) {
  if (!(hi > lo)) throw IoError("read_pgm16: need hi > lo");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path);
  char m0 = 0, m1 = 0;
  in >> m0 >> m1;
  if (m0 != 'P' || m1 != '5') throw IoError("not a P5 PGM: " + path);
  const int w = next_header_int(in);
  const int h = next_header_int(in);
  const int maxval = next_header_int(in);
  if (w <= 0 || h <= 0 || maxval != 65535) throw IoError("bad PGM header: " + path);
  in.get();  // single whitespace after maxval
  DepthGrid grid(h, w);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 2);
  const double scale = (hi - lo) / 65535.0;
  for (int i = 0; i < h; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!in) throw IoError("truncated PGM payload: " + path);
    for (int j = 0; j < w; ++j) {
      const std::uint16_t q = static_cast<std::uint16_t>((row[2 * j] << 8) | row[2 * j + 1]);
      grid.at(i, j) = lo + q * scale;
    }
  }
  return grid;
}

void write_ppm(const ImageGrid& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width()) * 3);
  for (int i = 0; i < image.height(); ++i) {
    for (int j = 0; j < image.width(); ++j) {
      for (int c = 0; c < 3; ++c) {
        const int src = image.channels() == 3 ? c : 0;
        const double v = std::clamp(image.at(src, i, j), 0.0, 1.0);
        row[3 * j + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw IoError("short write: " + path);
}

ImageGrid read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path);
  char m0 = 0, m1 = 0;
  in >> m0 >> m1;
  if (m0 != 'P' || m1 != '6') throw IoError("not a P6 PPM: " + path);
  const int w = next_header_int(in);
  const int h = next_header_int(in);
  const int maxval = next_header_int(in);
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("bad PPM header: " + path);
  in.get();
  ImageGrid image(h, w, 3);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
  for (int i = 0; i < h; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!in) throw IoError("truncated PPM payload: " + path);
    for (int j = 0; j < w; ++j) {
      for (int c = 0; c < 3; ++c) image.at(c, i, j) = row[3 * j + c] / 255.0;
    }
  }
  return image;
}

}  // namespace depthlab::io
