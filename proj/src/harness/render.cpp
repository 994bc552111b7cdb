#include "depthlab/harness/render.hpp"

#include <algorithm>
#include <cmath>

namespace depthlab::harness {

std::array<double, 3> palette_lookup(double t, const std::string& palette) {
  t = std::clamp(t, 0.0, 1.0);
  if (palette == "gray") return {t, t, t};
  if (palette != "magma") throw ConfigError("unknown palette: " + palette);
  const double pos = t * (kMagmaRamp.size() - 1);
  const int lo = std::min(static_cast<int>(pos), static_cast<int>(kMagmaRamp.size()) - 2);
  const double f = pos - lo;
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    out[c] = (1.0 - f) * kMagmaRamp[lo][c] + f * kMagmaRamp[lo + 1][c];
  }
  return out;
}

ImageGrid render_depth_map(const DepthGrid& depth, const std::string& palette) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (int p = 0; p < static_cast<int>(depth.size()); ++p) {
    if (!depth.valid()[p]) continue;
    const double v = depth.values()[p];
    if (first) {
      lo = hi = v;
      first = false;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (first) throw NoEvaluablePixelsError("render: no valid pixels");
  const double range = hi - lo;

  ImageGrid img(depth.height(), depth.width(), 3);
  for (int i = 0; i < depth.height(); ++i) {
    for (int j = 0; j < depth.width(); ++j) {
      if (!depth.is_valid(i, j)) continue;  // stays black
      const double t = range > 0.0 ? (depth.at(i, j) - lo) / range : 0.5;
      const auto rgb = palette_lookup(t, palette);
      for (int c = 0; c < 3; ++c) img.at(c, i, j) = rgb[c];
    }
  }
  return img;
}

}  // namespace depthlab::harness
