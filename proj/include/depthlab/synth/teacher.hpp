#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "depthlab/core/grid.hpp"
#include "depthlab/core/rng.hpp"
#include "depthlab/distill/cross_context.hpp"
#include "depthlab/synth/scene.hpp"

namespace depthlab::synth {

enum class TeacherKind { kGlobal, kLocal, kAssistant };

const char* teacher_kind_name(TeacherKind kind);
TeacherKind teacher_kind_from_name(const std::string& name);

// Error model of a pseudo-label source.
//   Global:    blur + seeded low-frequency multiplicative warp of the full
//              map, then crop: structurally faithful, detail-poor,
//              spatially varying error.
//   Local:     exact crop detail plus a per-call random affine: detail-rich
//              but frame-ambiguous.
//   Assistant: Local statistics plus i.i.d. Gaussian noise: a second,
//              differently biased source.
struct TeacherConfig {
  TeacherKind kind = TeacherKind::kGlobal;
  double blur_radius = 0.0;              // px at scene resolution
  double warp_amplitude = 0.0;           // multiplicative, fraction of value
  double patch_affine_scale_lo = 1.0;
  double patch_affine_scale_hi = 1.0;
  double patch_affine_shift_range = 0.0;  // fraction of the crop's value range
  double noise_sigma = 0.0;               // fraction of the crop's value range
};

// Pseudo-label oracle bound to one scene. The blurred/warped full map of
// the Global kind is built once per (scene, config); per-call randomness
// (Local affine draws, Assistant noise) comes from the rng handed to each
// call, so every output is a deterministic function of (config, scene seed,
// call seed).
class TeacherOracle : public distill::RegionPredictor {
 public:
  TeacherOracle(const Scene& scene, const TeacherConfig& cfg, std::uint64_t call_seed);

  // out_side == 0 keeps the crop's native resolution.
  DepthGrid predict_region(const CropRect& rect, int out_side, Rng& rng) const;

  Prediction predict(const ImageGrid& image, const CropRect& rect, int out_side,
                     bool want_features) override;

 private:
  const DepthGrid& source_map() const;

  const Scene* scene_;
  TeacherConfig cfg_;
  mutable DepthGrid processed_;  // lazily built Global-kind full map
  mutable bool processed_ready_ = false;
  Rng call_rng_;
};

// One-shot form of the oracle.
DepthGrid teacher_predict(const TeacherConfig& cfg, const Scene& scene, const CropRect& rect,
                          Rng& rng, int out_side = 0);

// Fixed proxy features derived from a label: x/y derivatives at two pyramid
// scales, the coarse pair upsampled back, giving 4 channels at label
// resolution.
FeatureGrid teacher_proxy_features(const DepthGrid& label);

enum class AssistantMode { kSelect, kAvg };

struct AssistantPolicy {
  AssistantMode mode = AssistantMode::kSelect;
  double primary_prob = 0.7;
  double agreement_sigma = 0.0;  // <= 0 selects the disagreement MAD
};

// Combines a primary and an assistant label.
//   Select: returns the primary with probability primary_prob, otherwise
//           the assistant; weights are identically 1.
//   Avg:    least-squares aligns the assistant onto the primary's frame,
//           averages pixel-wise, and weights each pixel by a Gaussian in
//           the residual disagreement. The weight grid multiplies the
//           per-pixel distillation loss downstream.
std::pair<DepthGrid, std::vector<double>> combine_assistant(const DepthGrid& primary,
                                                            const DepthGrid& assistant,
                                                            const AssistantPolicy& policy,
                                                            Rng& rng);

// Separable Gaussian blur over valid pixels (sigma in px; 0 is identity).
DepthGrid gaussian_blur(const DepthGrid& grid, double sigma);

}  // namespace depthlab::synth
