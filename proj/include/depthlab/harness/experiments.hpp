#pragma once

#include <string>

#include "depthlab/harness/config.hpp"

namespace depthlab::harness {

// Experiment drivers behind the CLI subcommands. Each writes a CSV report
// plus a JSON summary under out_dir, prints one line per ordering
// assertion, and returns the process exit code: 0 when all assertions pass
// (or are skipped in smoke mode), 1 when an assertion fails. Usage and
// config problems throw ConfigError (mapped to exit 2 by the CLI).
int cmd_fig2(const HarnessConfig& cfg, const std::string& out_dir);
int cmd_ablate_norm(const HarnessConfig& cfg, const std::string& out_dir);
int cmd_ablate_context(const HarnessConfig& cfg, const std::string& out_dir);
int cmd_ablate_assistant(const HarnessConfig& cfg, const std::string& out_dir);
int cmd_scaling(const HarnessConfig& cfg, const std::string& out_dir);
int cmd_train(const HarnessConfig& cfg, const std::string& out_dir);
int cmd_eval(const HarnessConfig& cfg, const std::string& checkpoint_path,
             const std::string& out_dir);
int cmd_render(const std::string& pfm_path, const std::string& ppm_path,
               const std::string& palette);
int cmd_gradcheck(const std::string& out_dir);

}  // namespace depthlab::harness
