#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "depthlab/core/rng.hpp"
#include "depthlab/io/pfm.hpp"
#include "depthlab/io/pnm.hpp"

using namespace depthlab;

namespace {

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("pfm: round trip is bit-exact including invalid pixels") {
  Rng rng(5);
  DepthGrid g(6, 9);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 9; ++j) {
      // float-precision payload so the f32 container is lossless
      g.at(i, j) = static_cast<float>(rng.uniform(-3.0, 11.0));
      if (rng.bernoulli(0.2)) g.set_valid(i, j, false);
    }
  }
  const std::string path = tmp_path("depthlab_roundtrip.pfm");
  io::write_pfm(g, path);
  const DepthGrid back = io::read_pfm(path);
  REQUIRE(back.height() == g.height());
  REQUIRE(back.width() == g.width());
  CHECK(back.valid() == g.valid());
  for (int p = 0; p < static_cast<int>(g.size()); ++p) {
    if (g.valid()[p]) CHECK(back.values()[p] == g.values()[p]);
  }

  // A second write-read cycle reproduces the file byte for byte.
  const std::string path2 = tmp_path("depthlab_roundtrip2.pfm");
  io::write_pfm(back, path2);
  CHECK(file_bytes(path) == file_bytes(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("pfm: rejects bad headers") {
  const std::string path = tmp_path("depthlab_bad.pfm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "PF\n2 2\n-1.0\n";  // color magic, not grayscale
  }
  CHECK_THROWS_AS(io::read_pfm(path), IoError);
  CHECK_THROWS_AS(io::read_pfm(tmp_path("depthlab_does_not_exist.pfm")), IoError);
  std::remove(path.c_str());
}

TEST_CASE("pgm16: round trip exact within quantization") {
  Rng rng(9);
  DepthGrid g(5, 4);
  const double lo = 0.5, hi = 4.5;
  for (auto& v : g.values()) v = rng.uniform(lo, hi);
  const std::string path = tmp_path("depthlab_quant.pgm");
  io::write_pgm16(g, path, lo, hi);
  const DepthGrid back = io::read_pgm16(path, lo, hi);
  const double step = (hi - lo) / 65535.0;
  for (int p = 0; p < static_cast<int>(g.size()); ++p) {
    CHECK(std::abs(back.values()[p] - g.values()[p]) <= 0.5 * step + 1e-12);
  }
  std::remove(path.c_str());
}

TEST_CASE("ppm: image round trip within 8-bit quantization") {
  Rng rng(13);
  ImageGrid img(4, 6, 3);
  for (auto& v : img.values()) v = rng.uniform();
  const std::string path = tmp_path("depthlab_img.ppm");
  io::write_ppm(img, path);
  const ImageGrid back = io::read_ppm(path);
  REQUIRE(back.channels() == 3);
  for (int p = 0; p < static_cast<int>(img.values().size()); ++p) {
    CHECK(std::abs(back.values()[p] - img.values()[p]) <= 0.5 / 255.0 + 1e-12);
  }
  std::remove(path.c_str());
}
