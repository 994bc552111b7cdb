#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "depthlab/train/trainer.hpp"

namespace depthlab::harness {

// One flat key-value document drives every experiment. Defaults mirror the
// full-scale reference constants (crop 644 -> 560 inputs, 20000 iterations,
// batch 8, lambda 0.5/1.0/2.0, 7:3 assistant ratio); desk-scale runs ship
// as config files overriding them. Unknown keys and type mismatches are
// rejected with the offending field named.
struct HarnessConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  bool smoke = false;

  // synthetic scenes
  int scene_size = 128;
  double ridge_amplitude = 0.08;
  double albedo_strength = 0.10;

  // crop geometry
  int crop_min_side = 644;
  int patch_side = 560;
  int model_input = 560;
  int patch_jitter = 0;

  // training
  int iterations = 20000;
  int batch = 8;
  double lr = 1e-3;
  double lambda1 = 0.5;
  double lambda2 = 1.0;
  double lambda3 = 2.0;
  std::string strategy = "hybrid";
  bool shared_context = true;
  bool local_global = true;
  int grad_scales = 4;
  int corpus_size = 0;
  int val_scenes = 16;
  int val_interval = 200;
  double epsilon = 1e-6;

  // teachers
  std::string sc_teacher = "global";
  std::string lg_teacher = "local";
  std::string assistant_mode = "none";  // none | select | avg
  std::string assistant_teacher = "assistant";
  double primary_prob = 0.7;
  double agreement_sigma = 0.0;  // 0 = disagreement MAD

  double global_blur_radius = 1.5;
  double global_warp_amplitude = 0.25;
  double local_affine_scale_lo = 0.7;
  double local_affine_scale_hi = 1.4;
  double local_affine_shift_range = 0.3;
  double assistant_noise_sigma = 0.05;

  // experiment drivers
  int scenes = 100;
  double win_fraction = 0.95;
  double ordering_slack = 0.02;
  std::vector<int> scaling_sizes = {100, 300, 1000, 3000};

  static HarnessConfig from_json(const nlohmann::json& doc);
  static HarnessConfig from_json_text(const std::string& text);
  static HarnessConfig from_file(const std::string& path);

  // Canonical (sorted-key, all fields) form; the config hash embedded in
  // every report is the FNV-1a 64 of its dump.
  nlohmann::json to_json() const;
  std::string config_hash() const;

  void validate() const;

  synth::SceneConfig scene_config() const;
  distill::CropPlanConfig crop_config() const;
  synth::TeacherConfig teacher_config(const std::string& kind_name) const;
  train::TrainConfig to_train_config() const;
};

}  // namespace depthlab::harness
