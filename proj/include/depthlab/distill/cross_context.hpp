#pragma once

#include "depthlab/distill/crop_plan.hpp"
#include "depthlab/loss/normalize.hpp"

namespace depthlab::distill {

// A depth predictor over square regions of a source image: `rect` selects
// the region in image coordinates, `out_side` the prediction resolution
// (the model-input framing). Implementations may ignore the pixel data
// (synthetic oracles bound to a scene) or crop-resize-and-run a network.
class RegionPredictor {
 public:
  virtual ~RegionPredictor() = default;

  struct Prediction {
    DepthGrid depth;
    FeatureGrid features;  // empty unless requested and exposed
  };

  virtual Prediction predict(const ImageGrid& image, const CropRect& rect, int out_side,
                             bool want_features) = 0;
};

// Shared-context distillation: both models receive the global region at
// model-input resolution; the distillation, feature, and gradient terms are
// all computed on that pair. The feature term is zero when either side
// exposes no features. The returned total is this part's share of the
// weighted objective: dis + lambda2 * feat + lambda3 * grad.
loss::LossBreakdown loss_shared_context(RegionPredictor& student, RegionPredictor& teacher,
                                        const ImageGrid& image, const CropPlan& plan,
                                        const loss::NormStrategy& strategy,
                                        const LossWeights& weights = {},
                                        int grad_scales = 4);

// Local-global distillation: the student predicts the resized global
// region once; the teacher predicts each local patch at model-input
// resolution. The student map is bilinearly sampled at each teacher pixel
// through the exact rational patch-to-model coordinate map (teacher labels
// are never resampled), and per-patch distillation losses are averaged.
loss::LossBreakdown loss_local_global(RegionPredictor& student, RegionPredictor& teacher,
                                      const ImageGrid& image, const CropPlan& plan,
                                      const loss::NormStrategy& strategy);

// Weighted objective: sc.dis + lambda1 * lg.dis + lambda2 * sc.feat +
// lambda3 * sc.grad. Either part may be absent (nullptr); the feature and
// gradient terms come from the shared-context pair only. Throws
// NonFiniteError on non-finite parts or weights.
double loss_total(const loss::LossBreakdown* sc, const loss::LossBreakdown* lg,
                  const LossWeights& w);

// Samples the student's global-region prediction at the teacher-pixel
// positions of `rect` (global-region coordinates, region side region_side).
// Output pixel (i, j) maps to region coordinate rect.origin + i * (side-1)
// / (out_side-1), then onto the student map by (m-1) / (region_side-1).
DepthGrid sample_patch_from_global(const DepthGrid& student_global, const CropRect& rect,
                                   int region_side, int out_side);

// Adjoint of sample_patch_from_global: scatters an upstream gradient on the
// sampled patch (flat layout) back onto the student map.
void sample_patch_from_global_vjp(const CropRect& rect, int region_side, int out_side,
                                  int global_h, int global_w,
                                  const std::vector<double>& upstream,
                                  std::vector<double>& grad_global);

}  // namespace depthlab::distill
