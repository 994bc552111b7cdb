#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "depthlab/harness/experiments.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool smoke = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "Experiment config (flat JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out_dir, "Output directory for reports");
  cmd->add_option("--seed", opts.seed, "Override the config seed");
  cmd->add_option("--threads", opts.threads, "Worker slots for independent runs");
  cmd->add_flag("--smoke", opts.smoke, "One-iteration smoke pass; orderings not evaluated");
}

depthlab::harness::HarnessConfig load(const CommonOpts& opts) {
  auto cfg = depthlab::harness::HarnessConfig::from_file(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.threads) cfg.threads = *opts.threads;
  if (opts.smoke) cfg.smoke = true;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depthlab: cross-context depth-distillation lab"};
  app.require_subcommand(1);

  CommonOpts fig2_opts, norm_opts, context_opts, assistant_opts, scaling_opts, train_opts,
      eval_opts;
  std::string checkpoint_path, render_in, render_out, palette = "magma", gradcheck_out = "out";

  add_common(app.add_subcommand("fig2", "Global vs local least-squares alignment sweep"),
             fig2_opts);
  add_common(app.add_subcommand("ablate-norm", "Normalization strategies x distillation modes"),
             norm_opts);
  add_common(app.add_subcommand("ablate-context", "Shared-context / local-global combinations"),
             context_opts);
  add_common(app.add_subcommand("ablate-assistant", "Assistant-guided supervision strategies"),
             assistant_opts);
  add_common(app.add_subcommand("scaling", "Corpus-size sweep for global vs hybrid"),
             scaling_opts);
  add_common(app.add_subcommand("train", "Train one student per the config"), train_opts);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on held-out scenes");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();

  auto* render_cmd = app.add_subcommand("render", "Render a depth PFM to a PPM heatmap");
  render_cmd->add_option("input", render_in, "Input PFM")->required();
  render_cmd->add_option("output", render_out, "Output PPM")->required();
  render_cmd->add_option("--palette", palette, "Palette: magma or gray");

  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Analytic vs finite-difference gradient check");
  gradcheck_cmd->add_option("--out", gradcheck_out, "Output directory for reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    using namespace depthlab::harness;
    if (app.got_subcommand("fig2")) return cmd_fig2(load(fig2_opts), fig2_opts.out_dir);
    if (app.got_subcommand("ablate-norm")) return cmd_ablate_norm(load(norm_opts), norm_opts.out_dir);
    if (app.got_subcommand("ablate-context")) {
      return cmd_ablate_context(load(context_opts), context_opts.out_dir);
    }
    if (app.got_subcommand("ablate-assistant")) {
      return cmd_ablate_assistant(load(assistant_opts), assistant_opts.out_dir);
    }
    if (app.got_subcommand("scaling")) return cmd_scaling(load(scaling_opts), scaling_opts.out_dir);
    if (app.got_subcommand("train")) return cmd_train(load(train_opts), train_opts.out_dir);
    if (app.got_subcommand("eval")) {
      return cmd_eval(load(eval_opts), checkpoint_path, eval_opts.out_dir);
    }
    if (app.got_subcommand("render")) return cmd_render(render_in, render_out, palette);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck(gradcheck_out);
  } catch (const depthlab::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const depthlab::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const depthlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
