#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "depthlab/core/rng.hpp"
#include "depthlab/metrics/align.hpp"
#include "depthlab/synth/scene.hpp"
#include "depthlab/synth/teacher.hpp"
#include "depthlab/train/trainer.hpp"

using namespace depthlab;
using namespace depthlab::synth;

namespace {

SceneConfig small_cfg(int n = 32) {
  SceneConfig cfg;
  cfg.height = n;
  cfg.width = n;
  return cfg;
}

double high_freq_energy(const DepthGrid& g) {
  double acc = 0.0;
  for (int i = 1; i + 1 < g.height(); ++i) {
    for (int j = 1; j + 1 < g.width(); ++j) {
      acc += std::abs(4 * g.at(i, j) - g.at(i - 1, j) - g.at(i + 1, j) - g.at(i, j - 1) -
                      g.at(i, j + 1));
    }
  }
  return acc / ((g.height() - 2) * (g.width() - 2));
}

}  // namespace

TEST_CASE("generate_scene: deterministic and strictly positive") {
  const SceneConfig cfg = small_cfg();
  const Scene a = generate_scene(77, cfg);
  const Scene b = generate_scene(77, cfg);
  CHECK(a.gt_depth.values() == b.gt_depth.values());
  CHECK(a.image.values() == b.image.values());

  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Scene s = generate_scene(seed, cfg);
    double lo = s.gt_depth.values()[0];
    for (double v : s.gt_depth.values()) lo = std::min(lo, v);
    CHECK(lo > 0.0);
  }

  CHECK_THROWS_AS(generate_scene(1, SceneConfig{8, 8}), ImageTooSmallError);
}

TEST_CASE("generate_scene: zero ridge amplitude removes the fine detail") {
  SceneConfig smooth = small_cfg();
  smooth.ridge_amplitude = 0.0;
  SceneConfig ridged = small_cfg();
  ridged.ridge_amplitude = 0.12;
  const double hf_smooth = high_freq_energy(generate_scene(5, smooth).gt_depth);
  const double hf_ridged = high_freq_energy(generate_scene(5, ridged).gt_depth);
  CHECK(hf_ridged > 5.0 * hf_smooth);
}

TEST_CASE("scene save/load round trip") {
  const Scene s = generate_scene(3, small_cfg(24));
  const std::string base = (std::filesystem::temp_directory_path() / "depthlab_scene").string();
  save_scene(s, base, "deadbeef");
  const Scene back = load_scene(base);
  CHECK(back.seed == s.seed);
  CHECK(back.gt_depth.height() == 24);
  for (std::size_t p = 0; p < s.gt_depth.size(); ++p) {
    CHECK(back.gt_depth.values()[p] ==
          doctest::Approx(s.gt_depth.values()[p]).epsilon(1e-6));
  }
  std::remove((base + ".pfm").c_str());
  std::remove((base + ".ppm").c_str());
  std::remove((base + ".json").c_str());
}

TEST_CASE("teacher_predict: zero-error configurations reproduce the crop") {
  const Scene scene = generate_scene(9, small_cfg());
  const CropRect rect{4, 6, 16};
  const DepthGrid expected = crop(scene.gt_depth, rect);

  TeacherConfig global;
  global.kind = TeacherKind::kGlobal;
  Rng r1(1);
  CHECK(teacher_predict(global, scene, rect, r1).values() == expected.values());

  TeacherConfig local;
  local.kind = TeacherKind::kLocal;
  Rng r2(2);
  CHECK(teacher_predict(local, scene, rect, r2).values() == expected.values());
}

TEST_CASE("teacher_predict: deterministic in (config, scene seed, call seed)") {
  const Scene scene = generate_scene(11, small_cfg());
  TeacherConfig cfg;
  cfg.kind = TeacherKind::kAssistant;
  cfg.patch_affine_scale_lo = 0.8;
  cfg.patch_affine_scale_hi = 1.3;
  cfg.patch_affine_shift_range = 0.2;
  cfg.noise_sigma = 0.05;
  Rng ra(42), rb(42);
  const DepthGrid a = teacher_predict(cfg, scene, {0, 0, 32}, ra, 16);
  const DepthGrid b = teacher_predict(cfg, scene, {0, 0, 32}, rb, 16);
  CHECK(a.values() == b.values());
  Rng rc(43);
  const DepthGrid c = teacher_predict(cfg, scene, {0, 0, 32}, rc, 16);
  CHECK(a.values() != c.values());
}

TEST_CASE("LocalTeacher error is purely affine") {
  const Scene scene = generate_scene(13, small_cfg());
  TeacherConfig cfg;
  cfg.kind = TeacherKind::kLocal;
  cfg.patch_affine_scale_lo = 0.6;
  cfg.patch_affine_scale_hi = 1.6;
  cfg.patch_affine_shift_range = 0.4;
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const CropRect rect{static_cast<int>(rng.uniform_int(0, 12)),
                        static_cast<int>(rng.uniform_int(0, 12)), 16};
    const DepthGrid label = teacher_predict(cfg, scene, rect, rng);
    const DepthGrid gt_crop = crop(scene.gt_depth, rect);
    CHECK(metrics::fit_scale_shift(label, gt_crop).residual < 1e-10);
  }
}

TEST_CASE("GlobalTeacher warp is not globally affine-correctable") {
  TeacherConfig cfg;
  cfg.kind = TeacherKind::kGlobal;
  cfg.blur_radius = 0.0;  // isolate the warp
  cfg.warp_amplitude = 0.25;
  int global_worse = 0;
  const int trials = 25;
  for (int t = 0; t < trials; ++t) {
    const Scene scene = generate_scene(100 + t, small_cfg(48));
    Rng rng(t);
    const DepthGrid label = teacher_predict(cfg, scene, {0, 0, 48}, rng);
    const double full_residual = metrics::fit_scale_shift(label, scene.gt_depth).residual;
    // Quadrant-wise fits adapt to the spatially varying scale.
    double quad_residual = 0.0;
    for (int qy = 0; qy < 2; ++qy) {
      for (int qx = 0; qx < 2; ++qx) {
        const CropRect q{qx * 24, qy * 24, 24};
        quad_residual +=
            metrics::fit_scale_shift(crop(label, q), crop(scene.gt_depth, q)).residual;
      }
    }
    quad_residual /= 4.0;
    global_worse += full_residual > quad_residual;
  }
  CHECK(global_worse >= 23);  // allow the occasional near-affine warp draw
}

TEST_CASE("fig2 direction: local alignment beats global under warp") {
  TeacherConfig cfg;
  cfg.kind = TeacherKind::kGlobal;
  cfg.blur_radius = 1.5;
  cfg.warp_amplitude = 0.25;
  int wins = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const Scene scene = generate_scene(500 + t, small_cfg(64));
    Rng rng(t);
    const DepthGrid label = teacher_predict(cfg, scene, {0, 0, 64}, rng);
    const auto [g, l] = metrics::fig2_experiment(label, scene.gt_depth);
    wins += l < g;
  }
  CHECK(wins >= 17);
}

TEST_CASE("combine_assistant: Select") {
  const Scene scene = generate_scene(21, small_cfg());
  const DepthGrid primary = scene.gt_depth;
  DepthGrid assistant = primary;
  for (auto& v : assistant.values()) v = 1.5 * v + 0.2;

  AssistantPolicy always;
  always.mode = AssistantMode::kSelect;
  always.primary_prob = 1.0;
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto [label, w] = combine_assistant(primary, assistant, always, rng);
    CHECK(label.values() == primary.values());
    for (double wi : w) CHECK(wi == 1.0);
  }

  // 10,000 seeded draws concentrate around the 7:3 ratio.
  AssistantPolicy ratio;
  ratio.mode = AssistantMode::kSelect;
  ratio.primary_prob = 0.7;
  Rng rng2(99);
  int picked = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto [label, w] = combine_assistant(primary, assistant, ratio, rng2);
    picked += label.values() == primary.values();
  }
  CHECK(picked >= 7000 - 150);
  CHECK(picked <= 7000 + 150);
}

TEST_CASE("combine_assistant: Avg with identical labels is the identity") {
  const Scene scene = generate_scene(23, small_cfg());
  AssistantPolicy avg;
  avg.mode = AssistantMode::kAvg;
  Rng rng(1);
  const auto [fused, w] = combine_assistant(scene.gt_depth, scene.gt_depth, avg, rng);
  for (std::size_t p = 0; p < fused.size(); ++p) {
    CHECK(fused.values()[p] == doctest::Approx(scene.gt_depth.values()[p]).epsilon(1e-12));
    CHECK(w[p] == doctest::Approx(1.0));
  }
}

TEST_CASE("combine_assistant: Avg aligns the assistant before fusing") {
  const Scene scene = generate_scene(25, small_cfg());
  const DepthGrid primary = scene.gt_depth;
  DepthGrid assistant = primary;
  for (auto& v : assistant.values()) v = 4.0 * v - 2.0;  // same map, different frame
  AssistantPolicy avg;
  avg.mode = AssistantMode::kAvg;
  Rng rng(1);
  const auto [fused, w] = combine_assistant(primary, assistant, avg, rng);
  for (std::size_t p = 0; p < fused.size(); ++p) {
    CHECK(fused.values()[p] == doctest::Approx(primary.values()[p]).epsilon(1e-9));
  }

  CHECK_THROWS_AS(combine_assistant(primary, DepthGrid(32, 32, 1.0), avg, rng),
                  DegeneratePredictionError);
}

TEST_CASE("select_draw frequency stays within four standard deviations") {
  const double p = 0.7;
  const int n = 20000;
  int picked = 0;
  for (int it = 0; it < n; ++it) picked += train::select_draw(12345, it, p);
  const double freq = static_cast<double>(picked) / n;
  const double sigma = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(freq - p) <= 4.0 * sigma);
}

TEST_CASE("teacher_proxy_features carry label gradients") {
  const Scene scene = generate_scene(27, small_cfg());
  const FeatureGrid f = teacher_proxy_features(scene.gt_depth);
  CHECK(f.channels() == 4);
  CHECK(f.height() == 32);
  double energy = 0.0;
  for (double v : f.values()) energy += std::abs(v);
  CHECK(energy > 0.0);
}
