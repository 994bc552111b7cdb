#include "depthlab/train/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "depthlab/core/rng.hpp"
#include "depthlab/distill/cross_context.hpp"

namespace depthlab::train {
namespace {

constexpr std::uint64_t kCorpusStream = 0xc0421;
constexpr std::uint64_t kValStream = 0x7a1;
constexpr std::uint64_t kInitStream = 0x141e7;
constexpr std::uint64_t kIterStream = 0x17e6;
constexpr std::uint64_t kScTeacherStream = 0x5c7;
constexpr std::uint64_t kLgTeacherStream = 0x16a7;
constexpr std::uint64_t kAssistStream = 0xa557;
constexpr std::uint64_t kSelectStream = 0x5e1ec7;
constexpr std::uint64_t kCombineStream = 0xc0b1;

constexpr std::uint32_t kCheckpointMagic = 0x4b434c44;  // "DLCK"
constexpr std::uint32_t kCheckpointVersion = 1;

void validate_config(const TrainConfig& cfg) {
  if (cfg.iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (cfg.batch < 1) throw ConfigError("train: batch must be >= 1");
  if (!cfg.shared_context && !cfg.local_global) {
    throw ConfigError("train: at least one of shared_context/local_global must be set");
  }
  if (cfg.corpus_size < 0) throw ConfigError("train: corpus_size must be >= 0");
}

}  // namespace

std::uint64_t corpus_scene_seed(std::uint64_t base_seed, int index) {
  return derive_seed(base_seed, kCorpusStream, static_cast<std::uint64_t>(index));
}

std::uint64_t validation_scene_seed(std::uint64_t base_seed, int index) {
  return derive_seed(base_seed, kValStream, static_cast<std::uint64_t>(index));
}

bool select_draw(std::uint64_t base_seed, int iteration, double primary_prob) {
  Rng sel(derive_seed(base_seed, kSelectStream, static_cast<std::uint64_t>(iteration)));
  return sel.uniform() < primary_prob;
}

metrics::MetricPair validate(const model::MicroStudent& student, const TrainConfig& cfg) {
  const int m = cfg.crop.model_input_side;
  model::MicroStudent::Activations acts;
  double absrel_acc = 0.0, delta_acc = 0.0;
  for (int k = 0; k < cfg.val_scenes; ++k) {
    const synth::Scene scene = synth::generate_scene(validation_scene_seed(cfg.seed, k), cfg.scene);
    const ImageGrid input = resize_bilinear(scene.image, m, m);
    const DepthGrid pred = student.forward(input, acts);
    const DepthGrid pred_up =
        resize_bilinear(pred, scene.gt_depth.height(), scene.gt_depth.width());
    const metrics::MetricPair mp = metrics::aligned_metrics(pred_up, scene.gt_depth);
    absrel_acc += mp.absrel;
    delta_acc += mp.delta1;
  }
  return {absrel_acc / cfg.val_scenes, delta_acc / cfg.val_scenes};
}

TrainResult train(const TrainConfig& cfg) {
  validate_config(cfg);

  TrainResult result;
  result.student = model::MicroStudent(3);
  result.student.init_he_uniform(derive_seed(cfg.seed, kInitStream));
  result.optimizer = model::Adam(result.student.params().size(), cfg.adam);

  const int m = cfg.crop.model_input_side;
  const std::size_t plane = static_cast<std::size_t>(m) * m;
  const bool use_assistant = cfg.assistant.has_value();
  const bool select_mode =
      use_assistant && cfg.assistant->mode == synth::AssistantMode::kSelect;

  std::vector<double> grad_accum(result.student.params().size());
  std::vector<double> d_out_grad(plane);
  std::vector<double> g_dis, g_grad, g_patch, g_feat, ga2_tmp, ga2_extra;
  model::MicroStudent::Activations acts;

  for (int it = 0; it < cfg.iterations; ++it) {
    IterationLog log;
    log.iteration = it + 1;
    bool picked_primary = true;
    if (select_mode) {
      picked_primary = select_draw(cfg.seed, it, cfg.assistant->primary_prob);
      log.picked_primary = picked_primary ? 1 : 0;
    }

    std::fill(grad_accum.begin(), grad_accum.end(), 0.0);

    for (int b = 0; b < cfg.batch; ++b) {
      const std::uint64_t element = static_cast<std::uint64_t>(it) * cfg.batch + b;
      Rng r(derive_seed(cfg.seed, kIterStream, element));
      const int corpus_index = cfg.corpus_size > 0
                                   ? static_cast<int>(r.uniform_int(0, cfg.corpus_size - 1))
                                   : static_cast<int>(element);
      const synth::Scene scene =
          synth::generate_scene(corpus_scene_seed(cfg.seed, corpus_index), cfg.scene);
      const distill::CropPlan plan = distill::sample_crop_plan(
          scene.image.height(), scene.image.width(), r.next_u64(), cfg.crop);

      const ImageGrid input = resize_bilinear(crop(scene.image, plan.global_rect), m, m);
      const DepthGrid d_s = result.student.forward(input, acts);
      std::fill(d_out_grad.begin(), d_out_grad.end(), 0.0);
      ga2_extra.clear();

      const synth::TeacherOracle sc_oracle(scene, cfg.sc_teacher, 0);
      const synth::TeacherOracle lg_oracle(scene, cfg.lg_teacher, 0);
      const synth::TeacherOracle as_oracle(scene, cfg.assistant_teacher, 0);
      Rng sc_rng(derive_seed(cfg.seed, kScTeacherStream, element));
      Rng lg_rng(derive_seed(cfg.seed, kLgTeacherStream, element));
      Rng as_rng(derive_seed(cfg.seed, kAssistStream, element));
      Rng comb_rng(derive_seed(cfg.seed, kCombineStream, element));

      // Labels pass through the assistant policy when configured. Select
      // uses the per-iteration draw; Avg fuses per label.
      std::vector<double> fused_weights;
      auto supervised_label = [&](const synth::TeacherOracle& oracle, Rng& rng,
                                  const CropRect& rect) -> DepthGrid {
        fused_weights.clear();
        DepthGrid label = oracle.predict_region(rect, m, rng);
        if (!use_assistant) return label;
        DepthGrid alt = as_oracle.predict_region(rect, m, as_rng);
        if (select_mode) return picked_primary ? label : alt;
        auto fused = synth::combine_assistant(label, alt, *cfg.assistant, comb_rng);
        fused_weights = std::move(fused.second);
        return std::move(fused.first);
      };

      if (cfg.shared_context) {
        const DepthGrid label = supervised_label(sc_oracle, sc_rng, plan.global_rect);
        const std::vector<double>* wts = fused_weights.empty() ? nullptr : &fused_weights;
        int used = 0;
        log.sc_dis += loss::loss_dis_vjp(d_s, label, cfg.strategy, g_dis, wts, &used);
        log.pixels_used += used;
        log.grad += loss::loss_grad_vjp(d_s, label, cfg.strategy, g_grad, cfg.grad_scales);
        const FeatureGrid f_t = synth::teacher_proxy_features(label);
        const FeatureGrid f_s = result.student.project_features(acts);
        log.feat += loss::loss_feat_vjp(f_s, f_t, g_feat);
        result.student.project_features_vjp(acts, g_feat, ga2_tmp);
        ga2_extra.assign(ga2_tmp.size(), 0.0);
        for (std::size_t p = 0; p < ga2_tmp.size(); ++p) {
          ga2_extra[p] = cfg.weights.lambda2 * ga2_tmp[p];
        }
        for (std::size_t p = 0; p < plane; ++p) {
          d_out_grad[p] += g_dis[p] + cfg.weights.lambda3 * g_grad[p];
        }
      }
      if (cfg.local_global) {
        const int n_patches = static_cast<int>(plan.local_rects.size());
        const double patch_coef = cfg.weights.lambda1 / n_patches;
        double lg_acc = 0.0;
        for (const CropRect& rect : plan.local_rects) {
          const CropRect in_image{plan.global_rect.x0 + rect.x0, plan.global_rect.y0 + rect.y0,
                                  rect.side};
          const DepthGrid label = supervised_label(lg_oracle, lg_rng, in_image);
          const std::vector<double>* wts = fused_weights.empty() ? nullptr : &fused_weights;
          const DepthGrid patch =
              distill::sample_patch_from_global(d_s, rect, plan.global_rect.side, m);
          int used = 0;
          lg_acc += loss::loss_dis_vjp(patch, label, cfg.strategy, g_patch, wts, &used);
          log.pixels_used += used;
          for (double& g : g_patch) g *= patch_coef;
          distill::sample_patch_from_global_vjp(rect, plan.global_rect.side, m, m, m, g_patch,
                                                d_out_grad);
        }
        log.lg_dis += lg_acc / n_patches;
      }

      result.student.backward(acts, d_out_grad, ga2_extra.empty() ? nullptr : &ga2_extra,
                              grad_accum);
    }

    const double inv_b = 1.0 / cfg.batch;
    log.sc_dis *= inv_b;
    log.lg_dis *= inv_b;
    log.feat *= inv_b;
    log.grad *= inv_b;
    log.total = log.sc_dis + cfg.weights.lambda1 * log.lg_dis + cfg.weights.lambda2 * log.feat +
                cfg.weights.lambda3 * log.grad;
    if (!std::isfinite(log.total)) {
      throw NonFiniteError("train: non-finite loss at iteration " + std::to_string(log.iteration));
    }
    for (double& g : grad_accum) g *= inv_b;
    result.optimizer.step(result.student.params(), grad_accum);
    result.iterations.push_back(log);

    if (cfg.val_interval > 0 &&
        ((it + 1) % cfg.val_interval == 0 || it + 1 == cfg.iterations)) {
      ValidationLog vlog;
      vlog.iteration = it + 1;
      vlog.metrics = validate(result.student, cfg);
      result.validations.push_back(vlog);
    }
  }

  result.final_metrics = result.validations.empty() ? validate(result.student, cfg)
                                                    : result.validations.back().metrics;
  return result;
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
void write_vec(std::ofstream& out, const std::vector<double>& v) {
  write_pod(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}
std::vector<double> read_vec(std::ifstream& in) {
  std::uint64_t n = 0;
  read_pod(in, n);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
  return v;
}

}  // namespace

void save_checkpoint(const TrainResult& result, const std::string& config_hash,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  write_pod(out, kCheckpointMagic);
  write_pod(out, kCheckpointVersion);
  write_vec(out, result.student.params());
  write_pod(out, static_cast<std::int64_t>(result.optimizer.steps()));
  write_vec(out, result.optimizer.m());
  write_vec(out, result.optimizer.v());
  write_pod(out, static_cast<std::uint64_t>(config_hash.size()));
  out.write(config_hash.data(), config_hash.size());
  if (!out) throw IoError("short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path);
  std::uint32_t magic = 0, version = 0;
  read_pod(in, magic);
  read_pod(in, version);
  if (magic != kCheckpointMagic || version != kCheckpointVersion) {
    throw IoError("bad checkpoint header: " + path);
  }
  Checkpoint ck;
  ck.params = read_vec(in);
  read_pod(in, ck.adam_steps);
  ck.adam_m = read_vec(in);
  ck.adam_v = read_vec(in);
  std::uint64_t hash_len = 0;
  read_pod(in, hash_len);
  ck.config_hash.resize(hash_len);
  in.read(ck.config_hash.data(), hash_len);
  if (!in) throw IoError("truncated checkpoint: " + path);
  return ck;
}

}  // namespace depthlab::train
