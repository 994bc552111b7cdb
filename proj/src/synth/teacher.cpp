#include "depthlab/synth/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "depthlab/metrics/align.hpp"

namespace depthlab::synth {
namespace {

constexpr double kTau = 6.283185307179586477;
constexpr std::uint64_t kWarpStream = 0x77a59f11d2ULL;

void value_range(const DepthGrid& g, double& lo, double& hi) {
  bool first = true;
  for (int p = 0; p < static_cast<int>(g.size()); ++p) {
    if (!g.valid()[p]) continue;
    const double v = g.values()[p];
    if (first) {
      lo = hi = v;
      first = false;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (first) throw TooFewPixelsError("teacher: no valid pixels in crop");
}

DepthGrid crop_resized(const DepthGrid& src, const CropRect& rect, int out_side) {
  DepthGrid c = crop(src, rect);
  if (out_side > 0 && out_side != rect.side) c = resize_bilinear(c, out_side, out_side);
  return c;
}

}  // namespace

const char* teacher_kind_name(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::kGlobal: return "global";
    case TeacherKind::kLocal: return "local";
    case TeacherKind::kAssistant: return "assistant";
  }
  return "?";
}

TeacherKind teacher_kind_from_name(const std::string& name) {
  if (name == "global") return TeacherKind::kGlobal;
  if (name == "local") return TeacherKind::kLocal;
  if (name == "assistant") return TeacherKind::kAssistant;
  throw ConfigError("unknown teacher kind: " + name);
}

DepthGrid gaussian_blur(const DepthGrid& grid, double sigma) {
  if (sigma <= 0.0) return grid;
  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * half + 1);
  for (int k = -half; k <= half; ++k) kernel[k + half] = std::exp(-0.5 * k * k / (sigma * sigma));

  const int h = grid.height(), w = grid.width();
  DepthGrid tmp(h, w), out(h, w);
  // Horizontal pass; kernel renormalized over the in-bounds valid support.
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0, wsum = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int x = j + k;
        if (x < 0 || x >= w || !grid.is_valid(i, x)) continue;
        acc += kernel[k + half] * grid.at(i, x);
        wsum += kernel[k + half];
      }
      if (wsum > 0.0) {
        tmp.at(i, j) = acc / wsum;
      } else {
        tmp.set_valid(i, j, false);
      }
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0, wsum = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int y = i + k;
        if (y < 0 || y >= h || !tmp.is_valid(y, j)) continue;
        acc += kernel[k + half] * tmp.at(y, j);
        wsum += kernel[k + half];
      }
      if (wsum > 0.0) {
        out.at(i, j) = acc / wsum;
      } else {
        out.set_valid(i, j, false);
      }
    }
  }
  return out;
}

TeacherOracle::TeacherOracle(const Scene& scene, const TeacherConfig& cfg,
                             std::uint64_t call_seed)
    : scene_(&scene), cfg_(cfg), call_rng_(derive_seed(scene.seed, 0xca11ULL, call_seed)) {}

const DepthGrid& TeacherOracle::source_map() const {
  if (cfg_.kind != TeacherKind::kGlobal) return scene_->gt_depth;
  if (!processed_ready_) {
    processed_ = gaussian_blur(scene_->gt_depth, cfg_.blur_radius);
    if (cfg_.warp_amplitude > 0.0) {
      // Seeded low-frequency multiplicative field made of a few broad
      // signed lobes: the error concentrates in localized regions (the way
      // a real teacher fails on a reflective surface or a sky patch), so it
      // is not affine-correctable globally yet stays nearly affine within a
      // small crop. Keeping the field localized also leaves the label frame
      // itself stable, which is what makes raw-L1 supervision viable on a
      // single source.
      Rng wr(derive_seed(scene_->seed, kWarpStream, 0));
      struct Lobe {
        double cx, cy, r, amp;
      };
      Lobe lobes[3];
      for (Lobe& l : lobes) {
        l.cx = wr.uniform(0.1, 0.9);
        l.cy = wr.uniform(0.1, 0.9);
        l.r = wr.uniform(0.09, 0.18);
        l.amp = wr.uniform(0.8, 1.2) * (wr.bernoulli(0.5) ? 1.0 : -1.0);
      }
      const int h = processed_.height(), w = processed_.width();
      for (int i = 0; i < h; ++i) {
        const double v = static_cast<double>(i) / (h - 1);
        for (int j = 0; j < w; ++j) {
          const double u = static_cast<double>(j) / (w - 1);
          double warp = 0.0;
          for (const Lobe& l : lobes) {
            const double du = (u - l.cx) / l.r, dv = (v - l.cy) / l.r;
            warp += l.amp * std::exp(-(du * du + dv * dv));
          }
          processed_.at(i, j) *= 1.0 + cfg_.warp_amplitude * warp;
        }
      }
    }
    processed_ready_ = true;
  }
  return processed_;
}

DepthGrid TeacherOracle::predict_region(const CropRect& rect, int out_side, Rng& rng) const {
  switch (cfg_.kind) {
    case TeacherKind::kGlobal:
      return crop_resized(source_map(), rect, out_side);
    case TeacherKind::kLocal:
    case TeacherKind::kAssistant: {
      DepthGrid label = crop_resized(scene_->gt_depth, rect, out_side);
      double lo = 0.0, hi = 0.0;
      value_range(label, lo, hi);
      const double range = hi - lo;
      const double scale = rng.uniform(cfg_.patch_affine_scale_lo, cfg_.patch_affine_scale_hi);
      const double shift = rng.uniform(-1.0, 1.0) * cfg_.patch_affine_shift_range * range;
      for (int p = 0; p < static_cast<int>(label.size()); ++p) {
        if (label.valid()[p]) label.values()[p] = scale * label.values()[p] + shift;
      }
      if (cfg_.kind == TeacherKind::kAssistant && cfg_.noise_sigma > 0.0) {
        const double sigma = cfg_.noise_sigma * range;
        for (int p = 0; p < static_cast<int>(label.size()); ++p) {
          if (label.valid()[p]) label.values()[p] += sigma * rng.gaussian();
        }
      }
      return label;
    }
  }
  throw Error("teacher: unreachable kind");
}

TeacherOracle::Prediction TeacherOracle::predict(const ImageGrid& /*image*/, const CropRect& rect,
                                                 int out_side, bool want_features) {
  Prediction p;
  p.depth = predict_region(rect, out_side, call_rng_);
  if (want_features) p.features = teacher_proxy_features(p.depth);
  return p;
}

DepthGrid teacher_predict(const TeacherConfig& cfg, const Scene& scene, const CropRect& rect,
                          Rng& rng, int out_side) {
  TeacherOracle oracle(scene, cfg, 0);
  return oracle.predict_region(rect, out_side, rng);
}

FeatureGrid teacher_proxy_features(const DepthGrid& label) {
  const int h = label.height(), w = label.width();
  FeatureGrid f(h, w, 4, 0.0);
  auto write_gradients = [](const DepthGrid& g, FeatureGrid& dst, int cx, int cy, int oh,
                            int ow) {
    // Central differences at the source scale, bilinearly spread when the
    // source is coarser than the feature grid.
    DepthGrid gx(g.height(), g.width()), gy(g.height(), g.width());
    for (int i = 0; i < g.height(); ++i) {
      for (int j = 0; j < g.width(); ++j) {
        const int jm = std::max(j - 1, 0), jp = std::min(j + 1, g.width() - 1);
        const int im = std::max(i - 1, 0), ip = std::min(i + 1, g.height() - 1);
        gx.at(i, j) = (g.is_valid(i, jp) && g.is_valid(i, jm))
                          ? (g.at(i, jp) - g.at(i, jm)) / (jp - jm)
                          : 0.0;
        gy.at(i, j) = (g.is_valid(ip, j) && g.is_valid(im, j))
                          ? (g.at(ip, j) - g.at(im, j)) / (ip - im)
                          : 0.0;
      }
    }
    const DepthGrid gxr = (g.height() == oh && g.width() == ow) ? gx : resize_bilinear(gx, oh, ow);
    const DepthGrid gyr = (g.height() == oh && g.width() == ow) ? gy : resize_bilinear(gy, oh, ow);
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        dst.at(cx, i, j) = gxr.at(i, j);
        dst.at(cy, i, j) = gyr.at(i, j);
      }
    }
  };
  write_gradients(label, f, 0, 1, h, w);
  if (h >= 2 && w >= 2) {
    const auto pyr = downsample_pyramid(label, 2);
    write_gradients(pyr[1], f, 2, 3, h, w);
  }
  return f;
}

std::pair<DepthGrid, std::vector<double>> combine_assistant(const DepthGrid& primary,
                                                            const DepthGrid& assistant,
                                                            const AssistantPolicy& policy,
                                                            Rng& rng) {
  if (primary.height() != assistant.height() || primary.width() != assistant.width()) {
    throw ShapeMismatchError("combine_assistant: label dims differ");
  }
  std::vector<double> weights(primary.size(), 1.0);
  if (policy.mode == AssistantMode::kSelect) {
    const bool take_primary = rng.uniform() < policy.primary_prob;
    return {take_primary ? primary : assistant, std::move(weights)};
  }

  // Avg: map the assistant into the primary's frame before any averaging.
  const metrics::AffineFit fit = metrics::fit_scale_shift(assistant, primary);
  const DepthGrid aligned = metrics::apply_affine(assistant, fit);

  DepthGrid fused(primary.height(), primary.width());
  std::vector<double> delta(primary.size(), 0.0);
  std::vector<double> abs_delta;
  abs_delta.reserve(primary.size());
  for (int p = 0; p < static_cast<int>(primary.size()); ++p) {
    if (primary.valid()[p] && aligned.valid()[p]) {
      fused.values()[p] = 0.5 * (primary.values()[p] + aligned.values()[p]);
      delta[p] = primary.values()[p] - aligned.values()[p];
      abs_delta.push_back(std::abs(delta[p]));
    } else {
      fused.values()[p] = 0.0;
      fused.valid()[p] = 0;
      weights[p] = 0.0;
    }
  }
  if (abs_delta.empty()) throw DisjointMasksError("combine_assistant: no joint pixels");

  double sigma = policy.agreement_sigma;
  if (sigma <= 0.0) {
    // Scale-free default: the mean absolute deviation of the disagreement
    // map around its median.
    std::vector<double> signed_d;
    signed_d.reserve(abs_delta.size());
    for (int p = 0; p < static_cast<int>(primary.size()); ++p) {
      if (primary.valid()[p] && aligned.valid()[p]) signed_d.push_back(delta[p]);
    }
    std::nth_element(signed_d.begin(), signed_d.begin() + signed_d.size() / 2, signed_d.end());
    const double med = signed_d[signed_d.size() / 2];
    double acc = 0.0;
    for (double v : signed_d) acc += std::abs(v - med);
    sigma = acc / signed_d.size();
  }
  if (sigma > 0.0) {
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int p = 0; p < static_cast<int>(primary.size()); ++p) {
      if (fused.valid()[p]) weights[p] = std::exp(-delta[p] * delta[p] * inv2s2);
    }
  }
  return {std::move(fused), std::move(weights)};
}

}  // namespace depthlab::synth
