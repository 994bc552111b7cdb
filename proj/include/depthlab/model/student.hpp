#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "depthlab/core/grid.hpp"

namespace depthlab::model {

// Minimal differentiable depth predictor:
//   conv3x3(C_in -> 16) + ReLU -> conv3x3(16 -> 16) + ReLU -> conv3x3(16 -> 1)
// with reflect padding, so spatial dims are preserved. Parameters live in
// one flat vector; forward and backward passes are written out by hand.
class MicroStudent {
 public:
  static constexpr int kHidden = 16;
  static constexpr int kFeatureChannels = 4;

  explicit MicroStudent(int in_channels = 3);

  int in_channels() const { return in_channels_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  void init_he_uniform(std::uint64_t seed);

  struct Activations {
    int h = 0;
    int w = 0;
    std::vector<double> input;  // C_in x H x W
    std::vector<double> z1, a1;  // 16 x H x W
    std::vector<double> z2, a2;  // 16 x H x W
  };

  // Deterministic forward pass; activations are retained for backward and
  // for the feature projection. Requires image channels == in_channels and
  // dims >= 2 (reflect padding).
  DepthGrid forward(const ImageGrid& image, Activations& acts) const;

  // Accumulates d(loss)/d(params) into grad_params (sized param_count())
  // from the loss gradient w.r.t. the output map and, optionally, an extra
  // gradient w.r.t. the penultimate activations a2 (the feature path).
  // ReLU uses subgradient 0 at 0.
  void backward(const Activations& acts, const std::vector<double>& grad_out,
                const std::vector<double>* grad_a2_extra,
                std::vector<double>& grad_params) const;

  // Student features: a2 projected to 4 channels through a fixed seeded
  // random linear map (independent of the trainable parameters).
  FeatureGrid project_features(const Activations& acts) const;
  void project_features_vjp(const Activations& acts, const std::vector<double>& grad_feat,
                            std::vector<double>& grad_a2) const;

  // Shifts layer biases so every ReLU input sits at least `margin` away
  // from zero on the probe input. Gradcheck instances are built this way so
  // a central finite-difference step cannot cross an activation kink.
  void nudge_biases_for_gradcheck(const ImageGrid& probe, double margin);

  // Flat-layout offsets (checkpoint and test use).
  int w1_offset() const { return 0; }
  int b1_offset() const { return b1_off_; }
  int w2_offset() const { return w2_off_; }
  int b2_offset() const { return b2_off_; }
  int w3_offset() const { return w3_off_; }
  int b3_offset() const { return b3_off_; }

 private:
  int in_channels_;
  int b1_off_, w2_off_, b2_off_, w3_off_, b3_off_;
  std::vector<double> params_;
  std::array<double, kFeatureChannels * kHidden> feature_proj_{};
};

}  // namespace depthlab::model
