#pragma once

#include <cstdint>
#include <string>

#include "depthlab/core/grid.hpp"

namespace depthlab::synth {

struct SceneConfig {
  int height = 128;
  int width = 128;
  double ridge_amplitude = 0.08;  // fine-detail amplitude, in depth units
  double albedo_strength = 0.10;  // texture modulation of the image

  bool operator==(const SceneConfig&) const = default;
};

// One synthetic training/validation sample: an RGB image together with its
// strictly positive ground-truth relative depth. Deterministic in (seed,
// config).
struct Scene {
  ImageGrid image;
  DepthGrid gt_depth;
  std::uint64_t seed = 0;
};

// Composes seeded primitives (a tilted base plane, ellipsoid bumps,
// high-frequency ridge textures) into a positive depth field. The image is
// built so depth is locally decodable by a small receptive field: one
// channel encodes normalized depth under an albedo texture, one Lambertian
// shading of the surface, one the fine ridge detail.
Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg);

// Reproducible corpus dumps: <base>.pfm (depth), <base>.ppm (image) and
// <base>.json carrying the seed and a caller-supplied config hash.
void save_scene(const Scene& scene, const std::string& base_path,
                const std::string& config_hash);
Scene load_scene(const std::string& base_path);

}  // namespace depthlab::synth
