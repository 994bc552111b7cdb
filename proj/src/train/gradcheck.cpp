#include "depthlab/train/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "depthlab/core/rng.hpp"
#include "depthlab/distill/cross_context.hpp"
#include "depthlab/model/student.hpp"
#include "depthlab/synth/scene.hpp"
#include "depthlab/synth/teacher.hpp"

namespace depthlab::train {
namespace {

// Fixed pipeline state for one instance: intput image, labels, patch rects.
struct Instance {
  ImageGrid input;
  DepthGrid sc_label;
  std::vector<CropRect> patch_rects;   // in global-region coordinates
  std::vector<DepthGrid> patch_labels;
  FeatureGrid teacher_features;
  int model_input = 8;
  int region_side = 8;
};

Instance build_instance(const GradcheckSpec& spec) {
  // Scenes have a 16-pixel minimum, so the small check instance is a
  // scene_size region cropped out of a larger scene.
  synth::SceneConfig scfg;
  scfg.height = std::max(16, spec.scene_size);
  scfg.width = scfg.height;
  const synth::Scene scene = synth::generate_scene(spec.scene_seed, scfg);

  Instance inst;
  inst.model_input = spec.model_input;
  inst.region_side = spec.scene_size;
  const int off = (scfg.height - spec.scene_size) / 2;
  const CropRect full{off, off, spec.scene_size};
  inst.input = resize_bilinear(crop(scene.image, full), spec.model_input, spec.model_input);

  synth::TeacherConfig sc_cfg;
  sc_cfg.kind = synth::TeacherKind::kGlobal;
  sc_cfg.blur_radius = 0.6;
  sc_cfg.warp_amplitude = 0.15;
  Rng sc_rng(derive_seed(spec.scene_seed, 0x6cad, 1));
  inst.sc_label = synth::teacher_predict(sc_cfg, scene, full, sc_rng, spec.model_input);
  inst.teacher_features = synth::teacher_proxy_features(inst.sc_label);

  synth::TeacherConfig lg_cfg;
  lg_cfg.kind = synth::TeacherKind::kLocal;
  lg_cfg.patch_affine_scale_lo = 0.85;
  lg_cfg.patch_affine_scale_hi = 1.2;
  lg_cfg.patch_affine_shift_range = 0.1;
  Rng lg_rng(derive_seed(spec.scene_seed, 0x6cad, 2));
  const int stride = spec.scene_size - spec.patch_side;
  for (int gy = 0; gy < 2; ++gy) {
    for (int gx = 0; gx < 2; ++gx) {
      const CropRect r{gx * stride, gy * stride, spec.patch_side};
      inst.patch_rects.push_back(r);  // region coordinates for the sampler
      const CropRect in_image{off + r.x0, off + r.y0, r.side};
      inst.patch_labels.push_back(
          synth::teacher_predict(lg_cfg, scene, in_image, lg_rng, spec.model_input));
    }
  }
  return inst;
}

double eval_loss(const model::MicroStudent& student, const Instance& inst,
                 const GradcheckSpec& spec) {
  model::MicroStudent::Activations acts;
  const DepthGrid d_s = student.forward(inst.input, acts);
  double total = 0.0;
  if (spec.shared_context) {
    total += loss::loss_dis(d_s, inst.sc_label, spec.strategy);
    total += spec.weights.lambda3 *
             loss::loss_grad(d_s, inst.sc_label, spec.strategy, spec.grad_scales);
    total += spec.weights.lambda2 *
             loss::loss_feat(student.project_features(acts), inst.teacher_features);
  }
  if (spec.local_global) {
    double acc = 0.0;
    for (std::size_t n = 0; n < inst.patch_rects.size(); ++n) {
      const DepthGrid patch = distill::sample_patch_from_global(
          d_s, inst.patch_rects[n], inst.region_side, inst.model_input);
      acc += loss::loss_dis(patch, inst.patch_labels[n], spec.strategy);
    }
    total += spec.weights.lambda1 * acc / inst.patch_rects.size();
  }
  return total;
}

double eval_loss_and_grad(const model::MicroStudent& student, const Instance& inst,
                          const GradcheckSpec& spec, std::vector<double>& grad_params) {
  model::MicroStudent::Activations acts;
  const DepthGrid d_s = student.forward(inst.input, acts);
  const std::size_t plane = d_s.size();
  std::vector<double> d_out(plane, 0.0);
  std::vector<double> ga2_extra;
  double total = 0.0;

  std::vector<double> g;
  if (spec.shared_context) {
    total += loss::loss_dis_vjp(d_s, inst.sc_label, spec.strategy, g);
    for (std::size_t p = 0; p < plane; ++p) d_out[p] += g[p];
    total += spec.weights.lambda3 *
             loss::loss_grad_vjp(d_s, inst.sc_label, spec.strategy, g, spec.grad_scales);
    for (std::size_t p = 0; p < plane; ++p) d_out[p] += spec.weights.lambda3 * g[p];
    std::vector<double> g_feat;
    total += spec.weights.lambda2 *
             loss::loss_feat_vjp(student.project_features(acts), inst.teacher_features, g_feat);
    std::vector<double> ga2;
    student.project_features_vjp(acts, g_feat, ga2);
    ga2_extra.assign(ga2.size(), 0.0);
    for (std::size_t p = 0; p < ga2.size(); ++p) ga2_extra[p] = spec.weights.lambda2 * ga2[p];
  }
  if (spec.local_global) {
    const double coef = spec.weights.lambda1 / inst.patch_rects.size();
    double acc = 0.0;
    for (std::size_t n = 0; n < inst.patch_rects.size(); ++n) {
      const DepthGrid patch = distill::sample_patch_from_global(
          d_s, inst.patch_rects[n], inst.region_side, inst.model_input);
      acc += loss::loss_dis_vjp(patch, inst.patch_labels[n], spec.strategy, g);
      for (double& v : g) v *= coef;
      distill::sample_patch_from_global_vjp(inst.patch_rects[n], inst.region_side,
                                            inst.model_input, d_s.height(), d_s.width(), g,
                                            d_out);
    }
    total += spec.weights.lambda1 * acc / inst.patch_rects.size();
  }

  grad_params.assign(student.params().size(), 0.0);
  student.backward(acts, d_out, ga2_extra.empty() ? nullptr : &ga2_extra, grad_params);
  return total;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckSpec& spec) {
  const Instance inst = build_instance(spec);
  model::MicroStudent student(3);
  student.init_he_uniform(spec.init_seed);
  student.nudge_biases_for_gradcheck(inst.input, spec.bias_margin);

  GradcheckReport report;
  std::vector<double> analytic;
  report.loss = eval_loss_and_grad(student, inst, spec, analytic);

  const int n = student.param_count();
  std::vector<double> fd(n, 0.0);
  const double h = spec.fd_step;
  for (int i = 0; i < n; ++i) {
    const double saved = student.params()[i];
    student.params()[i] = saved + h;
    const double up = eval_loss(student, inst, spec);
    student.params()[i] = saved - h;
    const double down = eval_loss(student, inst, spec);
    student.params()[i] = saved;
    fd[i] = (up - down) / (2.0 * h);
  }

  double fd_max = 0.0;
  for (double v : fd) fd_max = std::max(fd_max, std::abs(v));
  const double floor = std::max(0.01 * fd_max, 1e-9);
  for (int i = 0; i < n; ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), floor});
    const double rel = std::abs(analytic[i] - fd[i]) / denom;
    if (rel > report.max_rel) {
      report.max_rel = rel;
      report.worst_param = i;
      report.analytic_at_worst = analytic[i];
      report.fd_at_worst = fd[i];
    }
  }
  return report;
}

std::vector<GradcheckSpec> default_gradcheck_specs() {
  // Three frozen instances per strategy/mode combination. The seed pairs
  // were scanned so that no |.|, median-order, or ReLU kink of any combo
  // sits inside the central-difference window.
  constexpr std::pair<std::uint64_t, std::uint64_t> kSeeds[] = {{3, 103}, {4, 104}, {6, 106}};
  std::vector<GradcheckSpec> specs;
  for (loss::NormKind kind : {loss::NormKind::kGlobal, loss::NormKind::kHybrid,
                              loss::NormKind::kLocal, loss::NormKind::kNone}) {
    for (int mode = 0; mode < 3; ++mode) {
      for (const auto& [scene_seed, init_seed] : kSeeds) {
        GradcheckSpec s;
        s.strategy.kind = kind;
        s.shared_context = mode != 1;
        s.local_global = mode != 0;
        s.scene_seed = scene_seed;
        s.init_seed = init_seed;
        specs.push_back(s);
      }
    }
  }
  return specs;
}

}  // namespace depthlab::train
