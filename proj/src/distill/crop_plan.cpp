#include "depthlab/distill/crop_plan.hpp"

#include <algorithm>

#include "depthlab/core/rng.hpp"

namespace depthlab::distill {

CropPlan sample_crop_plan(int img_h, int img_w, std::uint64_t rng_seed,
                          const CropPlanConfig& cfg) {
  const int short_side = std::min(img_h, img_w);
  if (cfg.crop_min_side < 1 || cfg.patch_side < 1 || cfg.model_input_side < 1) {
    throw ConfigError("sample_crop_plan: sides must be positive");
  }
  if (short_side < cfg.crop_min_side) {
    throw ImageTooSmallError("sample_crop_plan: image shorter than crop_min_side");
  }
  if (cfg.patch_side > cfg.crop_min_side) {
    throw ConfigError("sample_crop_plan: patch_side must not exceed crop_min_side");
  }

  Rng rng(rng_seed);
  CropPlan plan;
  plan.model_input_side = cfg.model_input_side;
  const int side = static_cast<int>(rng.uniform_int(cfg.crop_min_side, short_side));
  plan.global_rect.side = side;
  plan.global_rect.x0 = static_cast<int>(rng.uniform_int(0, img_w - side));
  plan.global_rect.y0 = static_cast<int>(rng.uniform_int(0, img_h - side));

  const int stride = side - cfg.patch_side;
  for (int gy = 0; gy < 2; ++gy) {
    for (int gx = 0; gx < 2; ++gx) {
      CropRect r;
      r.side = cfg.patch_side;
      r.x0 = gx * stride;
      r.y0 = gy * stride;
      if (cfg.patch_jitter > 0) {
        r.x0 += static_cast<int>(rng.uniform_int(-cfg.patch_jitter, cfg.patch_jitter));
        r.y0 += static_cast<int>(rng.uniform_int(-cfg.patch_jitter, cfg.patch_jitter));
        r.x0 = std::clamp(r.x0, 0, side - r.side);
        r.y0 = std::clamp(r.y0, 0, side - r.side);
      }
      plan.local_rects.push_back(r);
    }
  }
  return plan;
}

}  // namespace depthlab::distill
