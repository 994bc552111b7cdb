#include "depthlab/harness/config.hpp"

#include <fstream>

#include "depthlab/harness/report.hpp"

namespace depthlab::harness {
namespace {

using nlohmann::json;

void expect(bool ok, const std::string& field, const char* what) {
  if (!ok) throw ConfigError("config field '" + field + "': " + what);
}

std::uint64_t get_u64(const json& v, const std::string& field) {
  expect(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0), field,
         "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

int get_int(const json& v, const std::string& field) {
  expect(v.is_number_integer(), field, "expected an integer");
  return v.get<int>();
}

double get_double(const json& v, const std::string& field) {
  expect(v.is_number(), field, "expected a number");
  return v.get<double>();
}

bool get_bool(const json& v, const std::string& field) {
  expect(v.is_boolean(), field, "expected a boolean");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& field) {
  expect(v.is_string(), field, "expected a string");
  return v.get<std::string>();
}

std::vector<int> get_int_array(const json& v, const std::string& field) {
  expect(v.is_array(), field, "expected an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    expect(e.is_number_integer(), field, "expected an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace

HarnessConfig HarnessConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be a flat JSON object");
  HarnessConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed") cfg.seed = get_u64(value, key);
    else if (key == "threads") cfg.threads = get_int(value, key);
    else if (key == "smoke") cfg.smoke = get_bool(value, key);
    else if (key == "scene_size") cfg.scene_size = get_int(value, key);
    else if (key == "ridge_amplitude") cfg.ridge_amplitude = get_double(value, key);
    else if (key == "albedo_strength") cfg.albedo_strength = get_double(value, key);
    else if (key == "crop_min_side") cfg.crop_min_side = get_int(value, key);
    else if (key == "patch_side") cfg.patch_side = get_int(value, key);
    else if (key == "model_input") cfg.model_input = get_int(value, key);
    else if (key == "patch_jitter") cfg.patch_jitter = get_int(value, key);
    else if (key == "iterations") cfg.iterations = get_int(value, key);
    else if (key == "batch") cfg.batch = get_int(value, key);
    else if (key == "lr") cfg.lr = get_double(value, key);
    else if (key == "lambda1") cfg.lambda1 = get_double(value, key);
    else if (key == "lambda2") cfg.lambda2 = get_double(value, key);
    else if (key == "lambda3") cfg.lambda3 = get_double(value, key);
    else if (key == "strategy") cfg.strategy = get_string(value, key);
    else if (key == "shared_context") cfg.shared_context = get_bool(value, key);
    else if (key == "local_global") cfg.local_global = get_bool(value, key);
    else if (key == "grad_scales") cfg.grad_scales = get_int(value, key);
    else if (key == "corpus_size") cfg.corpus_size = get_int(value, key);
    else if (key == "val_scenes") cfg.val_scenes = get_int(value, key);
    else if (key == "val_interval") cfg.val_interval = get_int(value, key);
    else if (key == "epsilon") cfg.epsilon = get_double(value, key);
    else if (key == "sc_teacher") cfg.sc_teacher = get_string(value, key);
    else if (key == "lg_teacher") cfg.lg_teacher = get_string(value, key);
    else if (key == "assistant_mode") cfg.assistant_mode = get_string(value, key);
    else if (key == "assistant_teacher") cfg.assistant_teacher = get_string(value, key);
    else if (key == "primary_prob") cfg.primary_prob = get_double(value, key);
    else if (key == "agreement_sigma") cfg.agreement_sigma = get_double(value, key);
    else if (key == "global_blur_radius") cfg.global_blur_radius = get_double(value, key);
    else if (key == "global_warp_amplitude") cfg.global_warp_amplitude = get_double(value, key);
    else if (key == "local_affine_scale_lo") cfg.local_affine_scale_lo = get_double(value, key);
    else if (key == "local_affine_scale_hi") cfg.local_affine_scale_hi = get_double(value, key);
    else if (key == "local_affine_shift_range")
      cfg.local_affine_shift_range = get_double(value, key);
    else if (key == "assistant_noise_sigma") cfg.assistant_noise_sigma = get_double(value, key);
    else if (key == "scenes") cfg.scenes = get_int(value, key);
    else if (key == "win_fraction") cfg.win_fraction = get_double(value, key);
    else if (key == "ordering_slack") cfg.ordering_slack = get_double(value, key);
    else if (key == "scaling_sizes") cfg.scaling_sizes = get_int_array(value, key);
    else throw ConfigError("unknown config field '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

HarnessConfig HarnessConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(doc);
}

HarnessConfig HarnessConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

json HarnessConfig::to_json() const {
  json doc;
  doc["seed"] = seed;
  doc["threads"] = threads;
  doc["smoke"] = smoke;
  doc["scene_size"] = scene_size;
  doc["ridge_amplitude"] = ridge_amplitude;
  doc["albedo_strength"] = albedo_strength;
  doc["crop_min_side"] = crop_min_side;
  doc["patch_side"] = patch_side;
  doc["model_input"] = model_input;
  doc["patch_jitter"] = patch_jitter;
  doc["iterations"] = iterations;
  doc["batch"] = batch;
  doc["lr"] = lr;
  doc["lambda1"] = lambda1;
  doc["lambda2"] = lambda2;
  doc["lambda3"] = lambda3;
  doc["strategy"] = strategy;
  doc["shared_context"] = shared_context;
  doc["local_global"] = local_global;
  doc["grad_scales"] = grad_scales;
  doc["corpus_size"] = corpus_size;
  doc["val_scenes"] = val_scenes;
  doc["val_interval"] = val_interval;
  doc["epsilon"] = epsilon;
  doc["sc_teacher"] = sc_teacher;
  doc["lg_teacher"] = lg_teacher;
  doc["assistant_mode"] = assistant_mode;
  doc["assistant_teacher"] = assistant_teacher;
  doc["primary_prob"] = primary_prob;
  doc["agreement_sigma"] = agreement_sigma;
  doc["global_blur_radius"] = global_blur_radius;
  doc["global_warp_amplitude"] = global_warp_amplitude;
  doc["local_affine_scale_lo"] = local_affine_scale_lo;
  doc["local_affine_scale_hi"] = local_affine_scale_hi;
  doc["local_affine_shift_range"] = local_affine_shift_range;
  doc["assistant_noise_sigma"] = assistant_noise_sigma;
  doc["scenes"] = scenes;
  doc["win_fraction"] = win_fraction;
  doc["ordering_slack"] = ordering_slack;
  doc["scaling_sizes"] = scaling_sizes;
  return doc;
}

std::string HarnessConfig::config_hash() const { return fnv1a_hex(to_json().dump()); }

void HarnessConfig::validate() const {
  auto check = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  check(threads >= 1, "config: threads must be >= 1");
  check(scene_size >= 16, "config: scene_size must be >= 16");
  check(ridge_amplitude >= 0.0, "config: ridge_amplitude must be >= 0");
  check(albedo_strength >= 0.0, "config: albedo_strength must be >= 0");
  check(crop_min_side >= 2, "config: crop_min_side must be >= 2");
  check(crop_min_side <= scene_size, "config: crop_min_side must not exceed scene_size");
  check(patch_side >= 2, "config: patch_side must be >= 2");
  check(patch_side <= crop_min_side, "config: patch_side must not exceed crop_min_side");
  check(model_input >= 2, "config: model_input must be >= 2");
  check(patch_jitter >= 0, "config: patch_jitter must be >= 0");
  check(iterations >= 1, "config: iterations must be >= 1");
  check(batch >= 1, "config: batch must be >= 1");
  check(lr > 0.0, "config: lr must be positive");
  check(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0,
        "config: loss weights must be >= 0");
  loss::norm_kind_from_name(strategy);  // throws on bad name
  check(shared_context || local_global,
        "config: at least one of shared_context/local_global must be true");
  check(grad_scales >= 1, "config: grad_scales must be >= 1");
  check(corpus_size >= 0, "config: corpus_size must be >= 0");
  check(val_scenes >= 1, "config: val_scenes must be >= 1");
  check(val_interval >= 0, "config: val_interval must be >= 0");
  check(epsilon > 0.0, "config: epsilon must be positive");
  synth::teacher_kind_from_name(sc_teacher);
  synth::teacher_kind_from_name(lg_teacher);
  synth::teacher_kind_from_name(assistant_teacher);
  check(assistant_mode == "none" || assistant_mode == "select" || assistant_mode == "avg",
        "config: assistant_mode must be none, select, or avg");
  check(primary_prob >= 0.0 && primary_prob <= 1.0, "config: primary_prob must be in [0, 1]");
  check(agreement_sigma >= 0.0, "config: agreement_sigma must be >= 0");
  check(global_blur_radius >= 0.0, "config: global_blur_radius must be >= 0");
  check(global_warp_amplitude >= 0.0, "config: global_warp_amplitude must be >= 0");
  check(local_affine_scale_lo > 0.0 && local_affine_scale_hi >= local_affine_scale_lo,
        "config: local affine scale range must be positive and ordered");
  check(local_affine_shift_range >= 0.0, "config: local_affine_shift_range must be >= 0");
  check(assistant_noise_sigma >= 0.0, "config: assistant_noise_sigma must be >= 0");
  check(scenes >= 1, "config: scenes must be >= 1");
  check(win_fraction >= 0.0 && win_fraction <= 1.0, "config: win_fraction must be in [0, 1]");
  check(ordering_slack >= 0.0, "config: ordering_slack must be >= 0");
  check(!scaling_sizes.empty(), "config: scaling_sizes must not be empty");
  for (std::size_t i = 0; i < scaling_sizes.size(); ++i) {
    check(scaling_sizes[i] >= 1, "config: scaling_sizes entries must be >= 1");
    if (i > 0) check(scaling_sizes[i] > scaling_sizes[i - 1], "config: scaling_sizes must ascend");
  }
}

synth::SceneConfig HarnessConfig::scene_config() const {
  synth::SceneConfig sc;
  sc.height = scene_size;
  sc.width = scene_size;
  sc.ridge_amplitude = ridge_amplitude;
  sc.albedo_strength = albedo_strength;
  return sc;
}

distill::CropPlanConfig HarnessConfig::crop_config() const {
  distill::CropPlanConfig cc;
  cc.crop_min_side = crop_min_side;
  cc.patch_side = patch_side;
  cc.model_input_side = model_input;
  cc.patch_jitter = patch_jitter;
  return cc;
}

synth::TeacherConfig HarnessConfig::teacher_config(const std::string& kind_name) const {
  synth::TeacherConfig tc;
  tc.kind = synth::teacher_kind_from_name(kind_name);
  tc.blur_radius = global_blur_radius;
  tc.warp_amplitude = global_warp_amplitude;
  tc.patch_affine_scale_lo = local_affine_scale_lo;
  tc.patch_affine_scale_hi = local_affine_scale_hi;
  tc.patch_affine_shift_range = local_affine_shift_range;
  tc.noise_sigma = assistant_noise_sigma;
  return tc;
}

train::TrainConfig HarnessConfig::to_train_config() const {
  train::TrainConfig tc;
  tc.iterations = iterations;
  tc.batch = batch;
  tc.seed = seed;
  tc.strategy.kind = loss::norm_kind_from_name(strategy);
  tc.strategy.epsilon = epsilon;
  tc.weights = {lambda1, lambda2, lambda3};
  tc.shared_context = shared_context;
  tc.local_global = local_global;
  tc.grad_scales = grad_scales;
  tc.scene = scene_config();
  tc.crop = crop_config();
  tc.sc_teacher = teacher_config(sc_teacher);
  tc.lg_teacher = teacher_config(lg_teacher);
  if (assistant_mode != "none") {
    synth::AssistantPolicy policy;
    policy.mode = assistant_mode == "avg" ? synth::AssistantMode::kAvg
                                          : synth::AssistantMode::kSelect;
    policy.primary_prob = primary_prob;
    policy.agreement_sigma = agreement_sigma;
    tc.assistant = policy;
    tc.assistant_teacher = teacher_config(assistant_teacher);
  }
  tc.adam.lr = lr;
  tc.corpus_size = corpus_size;
  tc.val_scenes = val_scenes;
  tc.val_interval = val_interval;
  return tc;
}

}  // namespace depthlab::harness
