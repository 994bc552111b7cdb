#include "depthlab/harness/experiments.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include "depthlab/core/rng.hpp"
#include "depthlab/harness/render.hpp"
#include "depthlab/harness/report.hpp"
#include "depthlab/io/pfm.hpp"
#include "depthlab/io/pnm.hpp"
#include "depthlab/train/gradcheck.hpp"

namespace depthlab::harness {
namespace {

namespace fs = std::filesystem;
constexpr std::uint64_t kFig2Stream = 0xf162;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

// Runs n jobs over `threads` worker slots. Each job owns its seed stream,
// so results do not depend on scheduling; the first exception, if any, is
// rethrown after all workers join.
void run_jobs(int threads, int n, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min(threads, n);
  pool.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct Assertions {
  bool smoke = false;
  bool all_pass = true;
  nlohmann::json results = nlohmann::json::array();

  // a <= b within the relative slack band.
  void leq(const std::string& name, double a, double b, double slack) {
    record(name, a, b, slack, a <= b * (1.0 + slack));
  }
  // a worse than b by at least `factor` (collapse checks).
  void worse_by(const std::string& name, double a, double b, double factor) {
    record(name, a, b, factor, a > b * factor);
  }
  void within(const std::string& name, double value, double target, double tol) {
    record(name, value, target, tol, std::abs(value - target) <= tol);
  }

  void record(const std::string& name, double a, double b, double band, bool pass) {
    if (smoke) {
      std::cout << "ordering " << name << ": not evaluated (smoke)\n";
      results.push_back({{"name", name}, {"status", "not evaluated (smoke)"}});
      return;
    }
    all_pass &= pass;
    std::cout << "ordering " << name << ": " << (pass ? "PASS" : "FAIL") << " ("
              << format_double(a) << " vs " << format_double(b) << ", band "
              << format_double(band) << ")\n";
    results.push_back({{"name", name},
                       {"status", pass ? "pass" : "fail"},
                       {"lhs", a},
                       {"rhs", b},
                       {"band", band}});
  }
};

struct RunRow {
  std::string id;
  std::string mode;
  std::string strategy;
  std::string assistant;
  int corpus_size = 0;
  metrics::MetricPair metrics;
};

// Trains the given per-run configs (worker slots per cfg.threads) and
// collects validation metrics in run order.
std::vector<RunRow> execute_runs(const HarnessConfig& cfg,
                                 std::vector<std::pair<RunRow, train::TrainConfig>>& runs) {
  std::vector<RunRow> rows(runs.size());
  run_jobs(cfg.threads, static_cast<int>(runs.size()), [&](int i) {
    const train::TrainResult result = train::train(runs[i].second);
    rows[i] = runs[i].first;
    rows[i].metrics = result.final_metrics;
  });
  return rows;
}

void apply_smoke(const HarnessConfig& cfg, train::TrainConfig& tc) {
  if (!cfg.smoke) return;
  tc.iterations = 1;
  tc.val_interval = 0;
  tc.val_scenes = std::min(tc.val_scenes, 4);
}

void write_run_report(const HarnessConfig& cfg, const std::string& out_dir,
                      const std::string& name, const std::vector<RunRow>& rows,
                      const Assertions& asserts) {
  Csv csv({"run_id", "mode", "strategy", "assistant_mode", "corpus_size", "absrel", "delta1",
           "seed", "config_hash"});
  for (const RunRow& r : rows) {
    csv.add_row({r.id, r.mode, r.strategy, r.assistant, std::to_string(r.corpus_size),
                 format_double(r.metrics.absrel), format_double(r.metrics.delta1),
                 std::to_string(cfg.seed), cfg.config_hash()});
  }
  csv.write(out_dir + "/" + name + ".csv");

  nlohmann::json summary;
  summary["config_hash"] = cfg.config_hash();
  summary["config"] = cfg.to_json();
  summary["assertions"] = asserts.results;
  summary["runs"] = nlohmann::json::array();
  for (const RunRow& r : rows) {
    summary["runs"].push_back({{"run_id", r.id},
                               {"absrel", r.metrics.absrel},
                               {"delta1", r.metrics.delta1}});
  }
  write_text_file(out_dir + "/" + name + "_summary.json", summary.dump(2) + "\n");
}

const RunRow& find_row(const std::vector<RunRow>& rows, const std::string& id) {
  for (const RunRow& r : rows) {
    if (r.id == id) return r;
  }
  throw Error("missing run row: " + id);
}

}  // namespace

int cmd_fig2(const HarnessConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  const int n = cfg.smoke ? std::min(cfg.scenes, 8) : cfg.scenes;
  const synth::SceneConfig scene_cfg = cfg.scene_config();
  const synth::TeacherConfig teacher_cfg = cfg.teacher_config("global");

  Csv csv({"seed", "global_absrel", "local_absrel"});
  int wins = 0;
  double mean_g = 0.0, mean_l = 0.0, max_diff = 0.0;
  for (int k = 0; k < n; ++k) {
    const std::uint64_t scene_seed = derive_seed(cfg.seed, kFig2Stream, k);
    const synth::Scene scene = synth::generate_scene(scene_seed, scene_cfg);
    Rng rng(derive_seed(cfg.seed, kFig2Stream, 1000003ULL + k));
    const CropRect full{0, 0, scene_cfg.width};
    const DepthGrid label = synth::teacher_predict(teacher_cfg, scene, full, rng);
    const auto [g, l] = metrics::fig2_experiment(label, scene.gt_depth);
    wins += l < g;
    mean_g += g;
    mean_l += l;
    max_diff = std::max(max_diff, std::abs(g - l));
    csv.add_row({std::to_string(scene_seed), format_double(g), format_double(l)});
  }
  mean_g /= n;
  mean_l /= n;
  csv.add_row({"summary", format_double(mean_g), format_double(mean_l)});
  csv.write(out_dir + "/fig2.csv");

  const double fraction = static_cast<double>(wins) / n;
  const bool no_effect = max_diff < 1e-10;
  nlohmann::json summary;
  summary["config_hash"] = cfg.config_hash();
  summary["scenes"] = n;
  summary["wins"] = wins;
  summary["win_fraction"] = fraction;
  summary["required_fraction"] = cfg.win_fraction;
  summary["mean_global_absrel"] = mean_g;
  summary["mean_local_absrel"] = mean_l;
  summary["effect"] = no_effect ? "none" : "local_alignment_wins";
  write_text_file(out_dir + "/fig2_summary.json", summary.dump(2) + "\n");

  std::cout << "fig2: local wins on " << wins << "/" << n << " scenes"
            << (no_effect ? " (no effect)" : "") << "\n";
  return fraction >= cfg.win_fraction ? 0 : 1;
}

int cmd_ablate_norm(const HarnessConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  const char* strategies[] = {"global", "none", "local", "hybrid"};
  std::vector<std::pair<RunRow, train::TrainConfig>> runs;
  for (const char* mode : {"sc", "lg"}) {
    for (const char* strategy : strategies) {
      RunRow row;
      row.id = std::string(mode) + "_" + strategy;
      row.mode = mode;
      row.strategy = strategy;
      row.assistant = "none";
      train::TrainConfig tc = cfg.to_train_config();
      tc.strategy.kind = loss::norm_kind_from_name(strategy);
      tc.shared_context = std::string(mode) == "sc";
      tc.local_global = !tc.shared_context;
      tc.assistant.reset();
      apply_smoke(cfg, tc);
      runs.emplace_back(std::move(row), std::move(tc));
    }
  }
  const std::vector<RunRow> rows = execute_runs(cfg, runs);

  Assertions asserts;
  asserts.smoke = cfg.smoke;
  const double slack = cfg.ordering_slack;
  asserts.leq("sc: hybrid <= global", find_row(rows, "sc_hybrid").metrics.absrel,
              find_row(rows, "sc_global").metrics.absrel, slack);
  asserts.leq("sc: none <= global", find_row(rows, "sc_none").metrics.absrel,
              find_row(rows, "sc_global").metrics.absrel, slack);
  asserts.leq("lg: hybrid <= global", find_row(rows, "lg_hybrid").metrics.absrel,
              find_row(rows, "lg_global").metrics.absrel, slack);
  asserts.worse_by("lg: none collapses vs global", find_row(rows, "lg_none").metrics.absrel,
                   find_row(rows, "lg_global").metrics.absrel, 1.25);

  write_run_report(cfg, out_dir, "ablate_norm", rows, asserts);
  return asserts.all_pass ? 0 : 1;
}

int cmd_ablate_context(const HarnessConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  std::vector<std::pair<RunRow, train::TrainConfig>> runs;
  auto add = [&](const std::string& id, bool sc, bool lg, bool full_context) {
    RunRow row;
    row.id = id;
    row.mode = std::string(sc ? "sc" : "") + (sc && lg ? "+" : "") + (lg ? "lg" : "");
    if (row.mode.empty()) row.mode = "baseline";
    row.strategy = cfg.strategy;
    row.assistant = "none";
    train::TrainConfig tc = cfg.to_train_config();
    tc.shared_context = sc || full_context;
    tc.local_global = lg;
    tc.assistant.reset();
    if (full_context) {
      // Baseline: full-image shared context, no crop sampling.
      tc.crop.crop_min_side = cfg.scene_size;
    }
    apply_smoke(cfg, tc);
    runs.emplace_back(std::move(row), std::move(tc));
  };
  add("baseline", false, false, true);
  add("sc_only", true, false, false);
  add("lg_only", false, true, false);
  add("both", true, true, false);
  const std::vector<RunRow> rows = execute_runs(cfg, runs);

  Assertions asserts;
  asserts.smoke = cfg.smoke;
  const double slack = cfg.ordering_slack;
  const double baseline = find_row(rows, "baseline").metrics.absrel;
  const double sc_only = find_row(rows, "sc_only").metrics.absrel;
  const double lg_only = find_row(rows, "lg_only").metrics.absrel;
  const double both = find_row(rows, "both").metrics.absrel;
  asserts.leq("sc_only beats baseline", sc_only, baseline, slack);
  asserts.leq("lg_only beats baseline", lg_only, baseline, slack);
  asserts.leq("both is minimum (vs baseline)", both, baseline, slack);
  asserts.leq("both is minimum (vs sc_only)", both, sc_only, slack);
  asserts.leq("both is minimum (vs lg_only)", both, lg_only, slack);

  write_run_report(cfg, out_dir, "ablate_context", rows, asserts);
  return asserts.all_pass ? 0 : 1;
}

int cmd_ablate_assistant(const HarnessConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  std::vector<std::pair<RunRow, train::TrainConfig>> runs;
  auto add = [&](const std::string& id, const std::string& assistant_mode, bool assistant_only) {
    RunRow row;
    row.id = id;
    row.mode = std::string(cfg.shared_context ? "sc" : "") +
               (cfg.shared_context && cfg.local_global ? "+" : "") +
               (cfg.local_global ? "lg" : "");
    row.strategy = cfg.strategy;
    row.assistant = assistant_mode;
    train::TrainConfig tc = cfg.to_train_config();
    tc.assistant.reset();
    if (assistant_mode == "select" || assistant_mode == "avg") {
      synth::AssistantPolicy policy;
      policy.mode =
          assistant_mode == "avg" ? synth::AssistantMode::kAvg : synth::AssistantMode::kSelect;
      policy.primary_prob = cfg.primary_prob;
      policy.agreement_sigma = cfg.agreement_sigma;
      tc.assistant = policy;
      tc.assistant_teacher = cfg.teacher_config(cfg.assistant_teacher);
    }
    if (assistant_only) {
      tc.sc_teacher = cfg.teacher_config(cfg.assistant_teacher);
      tc.lg_teacher = cfg.teacher_config(cfg.assistant_teacher);
    }
    apply_smoke(cfg, tc);
    runs.emplace_back(std::move(row), std::move(tc));
  };
  add("primary_only", "none", false);
  add("assistant_only", "none", true);
  add("avg", "avg", false);
  add("select", "select", false);
  const std::vector<RunRow> rows = execute_runs(cfg, runs);

  Assertions asserts;
  asserts.smoke = cfg.smoke;
  asserts.leq("select beats avg", find_row(rows, "select").metrics.absrel,
              find_row(rows, "avg").metrics.absrel, cfg.ordering_slack);

  // Empirical Select frequency over 10,000 per-iteration draws.
  int picked = 0;
  for (int it = 0; it < 10000; ++it) picked += train::select_draw(cfg.seed, it, cfg.primary_prob);
  const double freq = picked / 10000.0;
  asserts.within("select primary frequency", freq, cfg.primary_prob, 0.015);

  write_run_report(cfg, out_dir, "ablate_assistant", rows, asserts);
  return asserts.all_pass ? 0 : 1;
}

int cmd_scaling(const HarnessConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  std::vector<int> sizes = cfg.scaling_sizes;
  if (cfg.smoke && sizes.size() > 2) sizes.resize(2);

  std::vector<std::pair<RunRow, train::TrainConfig>> runs;
  for (int size : sizes) {
    for (const char* strategy : {"global", "hybrid"}) {
      RunRow row;
      row.id = "n" + std::to_string(size) + "_" + strategy;
      row.mode = std::string(cfg.shared_context ? "sc" : "") +
                 (cfg.shared_context && cfg.local_global ? "+" : "") +
                 (cfg.local_global ? "lg" : "");
      row.strategy = strategy;
      row.assistant = "none";
      row.corpus_size = size;
      train::TrainConfig tc = cfg.to_train_config();
      tc.strategy.kind = loss::norm_kind_from_name(strategy);
      tc.corpus_size = size;
      tc.assistant.reset();
      apply_smoke(cfg, tc);
      runs.emplace_back(std::move(row), std::move(tc));
    }
  }
  const std::vector<RunRow> rows = execute_runs(cfg, runs);

  Assertions asserts;
  asserts.smoke = cfg.smoke;
  const double slack = cfg.ordering_slack;
  for (int size : sizes) {
    const std::string tag = "n" + std::to_string(size);
    asserts.leq("hybrid <= global at " + tag, find_row(rows, tag + "_hybrid").metrics.absrel,
                find_row(rows, tag + "_global").metrics.absrel, slack);
  }
  if (!cfg.smoke) {
    const std::string first = "n" + std::to_string(sizes.front());
    const std::string last = "n" + std::to_string(sizes.back());
    const double gap_first = find_row(rows, first + "_global").metrics.absrel -
                             find_row(rows, first + "_hybrid").metrics.absrel;
    const double gap_last = find_row(rows, last + "_global").metrics.absrel -
                            find_row(rows, last + "_hybrid").metrics.absrel;
    // Non-shrinking gap, with the slack band scaled by the larger run.
    asserts.leq("gap non-shrinking (first <= last)", gap_first,
                gap_last + slack * find_row(rows, last + "_global").metrics.absrel, 0.0);
  }

  write_run_report(cfg, out_dir, "scaling", rows, asserts);
  return asserts.all_pass ? 0 : 1;
}

int cmd_train(const HarnessConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  train::TrainConfig tc = cfg.to_train_config();
  apply_smoke(cfg, tc);
  const train::TrainResult result = train::train(tc);

  Csv log({"iteration", "sc_dis", "lg_dis", "feat", "grad", "total", "pixels_used",
           "picked_primary"});
  for (const auto& it : result.iterations) {
    log.add_row({std::to_string(it.iteration), format_double(it.sc_dis),
                 format_double(it.lg_dis), format_double(it.feat), format_double(it.grad),
                 format_double(it.total), std::to_string(it.pixels_used),
                 std::to_string(it.picked_primary)});
  }
  log.write(out_dir + "/train_log.csv");

  Csv val({"iteration", "absrel", "delta1"});
  for (const auto& v : result.validations) {
    val.add_row({std::to_string(v.iteration), format_double(v.metrics.absrel),
                 format_double(v.metrics.delta1)});
  }
  val.write(out_dir + "/validation.csv");

  train::save_checkpoint(result, cfg.config_hash(), out_dir + "/checkpoint.bin");

  nlohmann::json summary;
  summary["config_hash"] = cfg.config_hash();
  summary["config"] = cfg.to_json();
  summary["final_absrel"] = result.final_metrics.absrel;
  summary["final_delta1"] = result.final_metrics.delta1;
  summary["iterations"] = static_cast<int>(result.iterations.size());
  write_text_file(out_dir + "/train_summary.json", summary.dump(2) + "\n");
  std::cout << "train: final absrel " << format_double(result.final_metrics.absrel)
            << ", delta1 " << format_double(result.final_metrics.delta1) << "\n";
  return 0;
}

int cmd_eval(const HarnessConfig& cfg, const std::string& checkpoint_path,
             const std::string& out_dir) {
  ensure_dir(out_dir);
  const train::Checkpoint ck = train::load_checkpoint(checkpoint_path);
  model::MicroStudent student(3);
  if (static_cast<int>(ck.params.size()) != student.param_count()) {
    throw ConfigError("eval: checkpoint parameter count does not match the model");
  }
  student.params() = ck.params;

  const train::TrainConfig tc = cfg.to_train_config();
  Csv csv({"scene_index", "scene_seed", "absrel", "delta1"});
  double mean_absrel = 0.0, mean_delta = 0.0;
  model::MicroStudent::Activations acts;
  for (int k = 0; k < tc.val_scenes; ++k) {
    const std::uint64_t scene_seed = train::validation_scene_seed(tc.seed, k);
    const synth::Scene scene = synth::generate_scene(scene_seed, tc.scene);
    const ImageGrid input =
        resize_bilinear(scene.image, tc.crop.model_input_side, tc.crop.model_input_side);
    const DepthGrid pred = student.forward(input, acts);
    const DepthGrid pred_up =
        resize_bilinear(pred, scene.gt_depth.height(), scene.gt_depth.width());
    const metrics::MetricPair m = metrics::aligned_metrics(pred_up, scene.gt_depth);
    mean_absrel += m.absrel;
    mean_delta += m.delta1;
    csv.add_row({std::to_string(k), std::to_string(scene_seed), format_double(m.absrel),
                 format_double(m.delta1)});
  }
  mean_absrel /= tc.val_scenes;
  mean_delta /= tc.val_scenes;
  csv.add_row({"mean", "", format_double(mean_absrel), format_double(mean_delta)});
  csv.write(out_dir + "/eval.csv");

  nlohmann::json summary;
  summary["config_hash"] = cfg.config_hash();
  summary["checkpoint_config_hash"] = ck.config_hash;
  summary["absrel"] = mean_absrel;
  summary["delta1"] = mean_delta;
  write_text_file(out_dir + "/eval_summary.json", summary.dump(2) + "\n");
  std::cout << "eval: absrel " << format_double(mean_absrel) << ", delta1 "
            << format_double(mean_delta) << "\n";
  return 0;
}

int cmd_render(const std::string& pfm_path, const std::string& ppm_path,
               const std::string& palette) {
  const DepthGrid depth = io::read_pfm(pfm_path);
  const ImageGrid img = render_depth_map(depth, palette);
  io::write_ppm(img, ppm_path);
  return 0;
}

int cmd_gradcheck(const std::string& out_dir) {
  ensure_dir(out_dir);
  const auto specs = train::default_gradcheck_specs();
  Csv csv({"strategy", "mode", "loss", "max_rel_error", "worst_param"});
  bool all_pass = true;
  for (const auto& spec : specs) {
    const train::GradcheckReport report = train::run_gradcheck(spec);
    const std::string mode = spec.shared_context && spec.local_global ? "sc+lg"
                             : spec.shared_context                    ? "sc"
                                                                      : "lg";
    const bool pass = report.pass();
    all_pass &= pass;
    std::cout << "gradcheck " << loss::norm_kind_name(spec.strategy.kind) << " " << mode << ": "
              << (pass ? "PASS" : "FAIL") << " (max rel " << format_double(report.max_rel)
              << ")\n";
    csv.add_row({loss::norm_kind_name(spec.strategy.kind), mode, format_double(report.loss),
                 format_double(report.max_rel), std::to_string(report.worst_param)});
  }
  csv.write(out_dir + "/gradcheck.csv");
  return all_pass ? 0 : 1;
}

}  // namespace depthlab::harness
