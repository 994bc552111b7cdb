#include <doctest.h>

#include <functional>
#include <limits>

#include "depthlab/core/rng.hpp"
#include "depthlab/distill/cross_context.hpp"
#include "depthlab/synth/scene.hpp"
#include "depthlab/synth/teacher.hpp"

using namespace depthlab;
using namespace depthlab::distill;

namespace {

// Predictor built from a plain callable on (rect, out_side).
class FnPredictor : public RegionPredictor {
 public:
  using Fn = std::function<DepthGrid(const CropRect&, int)>;
  explicit FnPredictor(Fn fn) : fn_(std::move(fn)) {}
  Prediction predict(const ImageGrid&, const CropRect& rect, int out_side, bool) override {
    return {fn_(rect, out_side), {}};
  }

 private:
  Fn fn_;
};

DepthGrid random_grid(Rng& rng, int h, int w) {
  DepthGrid g(h, w);
  for (auto& v : g.values()) v = rng.uniform(0.5, 4.0);
  return g;
}

CropPlan simple_plan(int region_side, int model_input, int patch_side) {
  CropPlan plan;
  plan.global_rect = {0, 0, region_side};
  plan.model_input_side = model_input;
  const int stride = region_side - patch_side;
  plan.local_rects = {{0, 0, patch_side},
                      {stride, 0, patch_side},
                      {0, stride, patch_side},
                      {stride, stride, patch_side}};
  return plan;
}

}  // namespace

TEST_CASE("loss_shared_context: identical predictors give zero dis") {
  Rng rng(5);
  const ImageGrid image(16, 16, 3, 0.5);
  const DepthGrid base = random_grid(rng, 8, 8);
  auto fn = [&base](const CropRect&, int) { return base; };
  FnPredictor student{fn}, teacher{fn};
  const CropPlan plan = simple_plan(16, 8, 8);

  for (loss::NormKind kind : {loss::NormKind::kGlobal, loss::NormKind::kNone,
                              loss::NormKind::kHybrid, loss::NormKind::kLocal}) {
    const auto breakdown =
        loss_shared_context(student, teacher, image, plan, {kind, 1e-6});
    CHECK(breakdown.dis == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(breakdown.grad == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(breakdown.pixels_used == 64);
  }
}

TEST_CASE("loss_shared_context: affine teacher under Global strategy") {
  Rng rng(7);
  const ImageGrid image(16, 16, 3, 0.5);
  const DepthGrid base = random_grid(rng, 8, 8);
  FnPredictor student{[&base](const CropRect&, int) { return base; }};
  FnPredictor teacher{[&base](const CropRect&, int) {
    DepthGrid t = base;
    for (auto& v : t.values()) v = 3.0 * v - 1.0;
    return t;
  }};
  const CropPlan plan = simple_plan(16, 8, 8);
  const auto breakdown =
      loss_shared_context(student, teacher, image, plan, {loss::NormKind::kGlobal, 1e-6});
  CHECK(breakdown.dis == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("loss_shared_context: value matches a straight-line recomputation") {
  synth::SceneConfig scfg;
  scfg.height = 32;
  scfg.width = 32;
  const synth::Scene scene = synth::generate_scene(1234, scfg);
  synth::TeacherConfig tcfg;
  tcfg.kind = synth::TeacherKind::kGlobal;
  tcfg.blur_radius = 1.0;
  tcfg.warp_amplitude = 0.2;
  synth::TeacherOracle teacher(scene, tcfg, 42);
  // Student: a fixed nonlinear function of the ground truth crop.
  FnPredictor student{[&scene](const CropRect& rect, int out) {
    DepthGrid d = resize_bilinear(crop(scene.gt_depth, rect), out, out);
    for (auto& v : d.values()) v = v * v;
    return d;
  }};
  CropPlan plan = simple_plan(24, 16, 12);
  plan.global_rect = {4, 2, 24};
  const loss::NormStrategy strategy{loss::NormKind::kHybrid, 1e-6};
  const auto breakdown = loss_shared_context(student, teacher, scene.image, plan, strategy);

  // Outside the pipeline: rebuild both maps and evaluate the loss pieces.
  DepthGrid d_s = resize_bilinear(crop(scene.gt_depth, plan.global_rect), 16, 16);
  for (auto& v : d_s.values()) v = v * v;
  synth::TeacherOracle teacher2(scene, tcfg, 42);
  Rng call_rng(derive_seed(scene.seed, 0xca11ULL, 42));
  const DepthGrid d_t = teacher2.predict_region(plan.global_rect, 16, call_rng);
  CHECK(breakdown.dis == doctest::Approx(loss::loss_dis(d_s, d_t, strategy)).epsilon(1e-13));
  CHECK(breakdown.grad ==
        doctest::Approx(loss::loss_grad(d_s, d_t, strategy, 4)).epsilon(1e-13));
}

TEST_CASE("loss_local_global: teacher equal to the student's own crops") {
  Rng rng(11);
  const ImageGrid image(8, 8, 3, 0.5);
  const DepthGrid global_pred = random_grid(rng, 8, 8);
  FnPredictor student{[&global_pred](const CropRect&, int out) {
    REQUIRE(out == 8);
    return global_pred;
  }};
  // Teacher returns the crop of the student's global map, resampled to the
  // model resolution through the same corner-aligned bilinear map the
  // sampler uses, so the pair agrees exactly on aligned rects.
  FnPredictor teacher{[&global_pred](const CropRect& rect, int out) {
    return resize_bilinear(crop(global_pred, rect), out, out);
  }};
  const CropPlan plan = simple_plan(8, 8, 4);
  for (loss::NormKind kind : {loss::NormKind::kGlobal, loss::NormKind::kNone}) {
    const auto breakdown = loss_local_global(student, teacher, image, plan, {kind, 1e-6});
    CHECK(breakdown.dis <= 1e-10);
  }
}

TEST_CASE("loss_local_global: single full-region patch equals shared-context dis") {
  Rng rng(13);
  const ImageGrid image(8, 8, 3, 0.5);
  const DepthGrid s_map = random_grid(rng, 8, 8);
  const DepthGrid t_map = random_grid(rng, 8, 8);
  FnPredictor student{[&s_map](const CropRect&, int) { return s_map; }};
  FnPredictor teacher{[&t_map](const CropRect&, int) { return t_map; }};
  CropPlan plan;
  plan.global_rect = {0, 0, 8};
  plan.model_input_side = 8;
  plan.local_rects = {{0, 0, 8}};
  const loss::NormStrategy strategy{loss::NormKind::kHybrid, 1e-6};
  const auto lg = loss_local_global(student, teacher, image, plan, strategy);
  const auto sc = loss_shared_context(student, teacher, image, plan, strategy);
  CHECK(lg.dis == doctest::Approx(sc.dis).epsilon(1e-13));
}

TEST_CASE("loss_local_global: per-patch affine offsets break the None strategy") {
  Rng rng(17);
  const ImageGrid image(8, 8, 3, 0.5);
  const DepthGrid global_pred = random_grid(rng, 8, 8);
  FnPredictor student{[&global_pred](const CropRect&, int) { return global_pred; }};
  int call = 0;
  FnPredictor teacher{[&global_pred, &call](const CropRect& rect, int out) {
    DepthGrid t = resize_bilinear(crop(global_pred, rect), out, out);
    const double scale = 1.0 + 0.2 * ++call;
    const double shift = 0.5 * call;
    for (auto& v : t.values()) v = scale * v + shift;
    return t;
  }};
  const CropPlan plan = simple_plan(8, 8, 4);
  const auto none = loss_local_global(student, teacher, image, plan, {loss::NormKind::kNone, 1e-6});
  CHECK(none.dis > 0.5);  // the student is perfect, the frames conflict
  call = 0;
  const auto global =
      loss_local_global(student, teacher, image, plan, {loss::NormKind::kGlobal, 1e-6});
  CHECK(global.dis <= 1e-10);
}

TEST_CASE("loss_total: weighting arithmetic") {
  loss::LossBreakdown sc;
  sc.dis = 1.0;
  loss::LossBreakdown lg;
  lg.dis = 2.0;
  const LossWeights defaults;
  CHECK(loss_total(&sc, &lg, defaults) == doctest::Approx(2.0));

  loss::LossBreakdown zero;
  CHECK(loss_total(&zero, &zero, defaults) == doctest::Approx(0.0));

  sc.feat = 0.25;
  sc.grad = 0.5;
  LossWeights w{0.5, 0.0, 0.0};
  CHECK(loss_total(&sc, &lg, w) == doctest::Approx(1.0 + 0.5 * 2.0));
  CHECK(loss_total(&sc, nullptr, defaults) ==
        doctest::Approx(1.0 + 1.0 * 0.25 + 2.0 * 0.5));

  sc.dis = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(loss_total(&sc, &lg, defaults), NonFiniteError);
}

TEST_CASE("loss_total is linear in each lambda") {
  loss::LossBreakdown sc;
  sc.dis = 0.7;
  sc.feat = 0.2;
  sc.grad = 0.4;
  loss::LossBreakdown lg;
  lg.dis = 1.3;
  for (int axis = 0; axis < 3; ++axis) {
    auto at = [&](double v) {
      LossWeights w{0.5, 1.0, 2.0};
      (axis == 0 ? w.lambda1 : axis == 1 ? w.lambda2 : w.lambda3) = v;
      return loss_total(&sc, &lg, w);
    };
    const double f0 = at(0.0), f1 = at(1.0), f2 = at(2.0);
    CHECK(f2 - f1 == doctest::Approx(f1 - f0).epsilon(1e-12));
  }
}

TEST_CASE("sample_patch_from_global: validity-aware bilinear sampling") {
  Rng rng(19);
  DepthGrid g = random_grid(rng, 8, 8);
  // identity mapping when the rect spans the region at equal resolution
  const DepthGrid full = sample_patch_from_global(g, {0, 0, 8}, 8, 8);
  CHECK(full.values() == g.values());

  g.set_valid(3, 3, false);
  const DepthGrid sampled = sample_patch_from_global(g, {2, 2, 4}, 8, 6);
  int invalid = 0;
  for (auto v : sampled.valid()) invalid += v == 0;
  CHECK(invalid > 0);

  CHECK_THROWS_AS(sample_patch_from_global(g, {6, 6, 4}, 8, 4), OutOfBoundsError);
}
