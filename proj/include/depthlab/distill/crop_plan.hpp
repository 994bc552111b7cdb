#pragma once

#include <cstdint>
#include <vector>

#include "depthlab/core/grid.hpp"

namespace depthlab::distill {

struct CropPlanConfig {
  // Documented full-scale defaults; desk-scale configs override them.
  int crop_min_side = 644;
  int patch_side = 560;
  int model_input_side = 560;
  int patch_jitter = 0;  // max per-axis jitter in pixels for local patches
};

// A sampled global region plus the local patches tiling it. The global rect
// lives in source-image coordinates; local rects in global-region
// coordinates. All rects are square.
struct CropPlan {
  CropRect global_rect;
  std::vector<CropRect> local_rects;
  int model_input_side = 560;
};

struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 1.0;
  double lambda3 = 2.0;
};

// Draws the global region (side uniform in [crop_min_side, min(h, w)],
// position uniform among in-bounds placements) and lays a 2x2 grid of
// patch_side patches covering it corner-to-corner (stride = side -
// patch_side per axis), optionally jittered within bounds. Deterministic
// for a fixed seed. Throws ImageTooSmallError / ConfigError.
CropPlan sample_crop_plan(int img_h, int img_w, std::uint64_t rng_seed,
                          const CropPlanConfig& cfg);

}  // namespace depthlab::distill
