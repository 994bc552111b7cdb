#pragma once

#include <cstdint>
#include <vector>

#include "depthlab/distill/crop_plan.hpp"
#include "depthlab/loss/normalize.hpp"

namespace depthlab::train {

// One finite-difference check instance: a small scene, fixed teacher
// labels, and a student whose ReLU inputs have been nudged clear of the
// central-difference window.
struct GradcheckSpec {
  loss::NormStrategy strategy;
  bool shared_context = true;
  bool local_global = true;
  std::uint64_t scene_seed = 1;
  std::uint64_t init_seed = 1;
  int scene_size = 8;
  int model_input = 8;
  int patch_side = 4;
  int grad_scales = 4;
  distill::LossWeights weights;
  double fd_step = 1e-4;
  double bias_margin = 2e-3;
};

struct GradcheckReport {
  double loss = 0.0;
  double max_rel = 0.0;
  int worst_param = -1;
  double analytic_at_worst = 0.0;
  double fd_at_worst = 0.0;
  bool pass(double tol = 1e-4) const { return max_rel < tol; }
};

// Central finite differences over every parameter against the analytic
// gradient of the full objective (distillation + feature + gradient terms
// under the spec weights, per the mode flags). The relative error of
// component i is |a_i - f_i| / max(|a_i|, |f_i|, 0.01 * ||f||_inf, 1e-9);
// the floor keeps pure finite-difference noise on near-zero components from
// registering as disagreement.
GradcheckReport run_gradcheck(const GradcheckSpec& spec);

// The frozen instances behind the `gradcheck` command and the acceptance
// suite: all four strategies crossed with {sc, lg, sc+lg}.
std::vector<GradcheckSpec> default_gradcheck_specs();

}  // namespace depthlab::train
