#pragma once

#include <optional>
#include <string>
#include <vector>

#include "depthlab/distill/crop_plan.hpp"
#include "depthlab/loss/normalize.hpp"
#include "depthlab/metrics/align.hpp"
#include "depthlab/model/adam.hpp"
#include "depthlab/model/student.hpp"
#include "depthlab/synth/scene.hpp"
#include "depthlab/synth/teacher.hpp"

namespace depthlab::train {

struct TrainConfig {
  int iterations = 2000;
  int batch = 4;
  std::uint64_t seed = 1;

  loss::NormStrategy strategy;
  distill::LossWeights weights;
  bool shared_context = true;
  bool local_global = true;
  int grad_scales = 4;

  synth::SceneConfig scene;
  distill::CropPlanConfig crop;

  // Shared-context labels come from sc_teacher, local-global patch labels
  // from lg_teacher (the same underlying model sees different context sizes
  // in the two pipelines, so their error profiles differ).
  synth::TeacherConfig sc_teacher;
  synth::TeacherConfig lg_teacher;

  // Optional assistant-guided supervision: a second label source combined
  // per the policy (Select draws once per iteration; Avg fuses per label).
  std::optional<synth::AssistantPolicy> assistant;
  synth::TeacherConfig assistant_teacher;

  model::AdamConfig adam;

  // Scene corpus: > 0 draws uniformly from that many nested corpus seeds;
  // 0 streams fresh scenes. Corpus seed i is identical across sizes.
  int corpus_size = 0;

  int val_scenes = 16;
  int val_interval = 200;
};

struct IterationLog {
  int iteration = 0;
  double sc_dis = 0.0;
  double lg_dis = 0.0;
  double feat = 0.0;
  double grad = 0.0;
  double total = 0.0;
  int pixels_used = 0;
  // 1 when the iteration's Select draw picked the primary teacher, 0 when
  // it picked the assistant, -1 without a Select policy.
  int picked_primary = -1;
};

struct ValidationLog {
  int iteration = 0;
  metrics::MetricPair metrics;
};

struct TrainResult {
  model::MicroStudent student{3};
  model::Adam optimizer{0};
  std::vector<IterationLog> iterations;
  std::vector<ValidationLog> validations;
  metrics::MetricPair final_metrics;
};

std::uint64_t corpus_scene_seed(std::uint64_t base_seed, int index);
std::uint64_t validation_scene_seed(std::uint64_t base_seed, int index);

// The per-iteration supervision-source draw of Select-mode assistant
// training; exposed so reports can audit the empirical primary frequency
// against the configured ratio.
bool select_draw(std::uint64_t base_seed, int iteration, double primary_prob);

// Full-image metrics of a student against ground truth on the held-out
// validation scenes of `cfg` (scale-shift aligned per scene, averaged).
metrics::MetricPair validate(const model::MicroStudent& student, const TrainConfig& cfg);

// Runs the seeded training loop: per iteration, batch scenes are drawn,
// crop plans sampled, teacher labels obtained (through the assistant policy
// when set), the weighted objective backpropagated, and one Adam step
// applied. Bit-reproducible for a fixed seed. Throws NonFiniteError (with
// the offending iteration in the message) if the loss leaves the finite
// range.
TrainResult train(const TrainConfig& cfg);

// Versioned binary checkpoint: magic, param count, little-endian f64
// parameter vector, optimizer state, config hash.
void save_checkpoint(const TrainResult& result, const std::string& config_hash,
                     const std::string& path);
struct Checkpoint {
  std::vector<double> params;
  std::vector<double> adam_m, adam_v;
  std::int64_t adam_steps = 0;
  std::string config_hash;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace depthlab::train
