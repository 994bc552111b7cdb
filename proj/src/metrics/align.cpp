#include "depthlab/metrics/align.hpp"

#include <algorithm>
#include <cmath>

namespace depthlab::metrics {
namespace {

// Central h/2 x w/2 rectangle; fig2 works on possibly non-square grids so
// this does not go through CropRect.
DepthGrid center_crop_half(const DepthGrid& g) {
  const int ch = g.height() / 2, cw = g.width() / 2;
  const int y0 = g.height() / 4, x0 = g.width() / 4;
  DepthGrid out(ch, cw);
  for (int i = 0; i < ch; ++i) {
    for (int j = 0; j < cw; ++j) {
      out.at(i, j) = g.at(y0 + i, x0 + j);
      out.set_valid(i, j, g.is_valid(y0 + i, x0 + j));
    }
  }
  return out;
}

}  // namespace

AffineFit fit_scale_shift(const DepthGrid& pred, const DepthGrid& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw ShapeMismatchError("fit_scale_shift: dims differ");
  }
  double sp = 0.0, sg = 0.0;
  int n = 0;
  for (int p = 0; p < static_cast<int>(pred.size()); ++p) {
    if (pred.valid()[p] && gt.valid()[p]) {
      sp += pred.values()[p];
      sg += gt.values()[p];
      ++n;
    }
  }
  if (n < 2) throw DisjointMasksError("fit_scale_shift: fewer than 2 joint pixels");
  const double mp = sp / n, mg = sg / n;
  double var_p = 0.0, cov = 0.0;
  for (int p = 0; p < static_cast<int>(pred.size()); ++p) {
    if (pred.valid()[p] && gt.valid()[p]) {
      const double dp = pred.values()[p] - mp;
      cov += dp * (gt.values()[p] - mg);
      var_p += dp * dp;
    }
  }
  var_p /= n;
  cov /= n;
  if (var_p <= 1e-12) throw DegeneratePredictionError("fit_scale_shift: prediction variance <= 1e-12");

  AffineFit fit;
  fit.scale = cov / var_p;
  fit.shift = mg - fit.scale * mp;
  double rss = 0.0;
  for (int p = 0; p < static_cast<int>(pred.size()); ++p) {
    if (pred.valid()[p] && gt.valid()[p]) {
      const double e = fit.scale * pred.values()[p] + fit.shift - gt.values()[p];
      rss += e * e;
    }
  }
  fit.residual = rss / n;
  return fit;
}

DepthGrid apply_affine(const DepthGrid& grid, const AffineFit& fit) {
  DepthGrid out = grid;
  for (int p = 0; p < static_cast<int>(out.size()); ++p) {
    if (out.valid()[p]) out.values()[p] = fit.scale * out.values()[p] + fit.shift;
  }
  return out;
}

double absrel(const DepthGrid& pred_aligned, const DepthGrid& gt, int* excluded) {
  if (pred_aligned.height() != gt.height() || pred_aligned.width() != gt.width()) {
    throw ShapeMismatchError("absrel: dims differ");
  }
  double acc = 0.0;
  int n = 0, skipped = 0;
  for (int p = 0; p < static_cast<int>(gt.size()); ++p) {
    if (!pred_aligned.valid()[p] || !gt.valid()[p]) continue;
    const double g = gt.values()[p];
    if (std::abs(g) <= 1e-9) {
      ++skipped;
      continue;
    }
    acc += std::abs(pred_aligned.values()[p] - g) / g;
    ++n;
  }
  if (excluded) *excluded = skipped;
  if (n == 0) throw NoEvaluablePixelsError("absrel: no evaluable pixels");
  return acc / n;
}

double delta1(const DepthGrid& pred_aligned, const DepthGrid& gt, int* excluded) {
  if (pred_aligned.height() != gt.height() || pred_aligned.width() != gt.width()) {
    throw ShapeMismatchError("delta1: dims differ");
  }
  int n = 0, hits = 0, skipped = 0;
  for (int p = 0; p < static_cast<int>(gt.size()); ++p) {
    if (!pred_aligned.valid()[p] || !gt.valid()[p]) continue;
    const double d = pred_aligned.values()[p], g = gt.values()[p];
    if (d <= 0.0 || g <= 0.0) {
      ++skipped;
      continue;
    }
    hits += std::max(d / g, g / d) < 1.25;
    ++n;
  }
  if (excluded) *excluded = skipped;
  if (n == 0) throw NoEvaluablePixelsError("delta1: no evaluable pixels");
  return static_cast<double>(hits) / n;
}

MetricPair aligned_metrics(const DepthGrid& pred, const DepthGrid& gt) {
  const AffineFit fit = fit_scale_shift(pred, gt);
  const DepthGrid aligned = apply_affine(pred, fit);
  MetricPair m;
  m.absrel = absrel(aligned, gt);
  m.delta1 = delta1(aligned, gt);
  return m;
}

std::pair<double, double> fig2_experiment(const DepthGrid& pred, const DepthGrid& gt) {
  if (pred.height() < 4 || pred.width() < 4) {
    throw TooSmallError("fig2_experiment: need at least 4x4 grids");
  }
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw ShapeMismatchError("fig2_experiment: dims differ");
  }
  // Global least squares: fit on the full frame, evaluate on the center.
  const AffineFit global_fit = fit_scale_shift(pred, gt);
  const DepthGrid aligned_full = apply_affine(pred, global_fit);
  const double global_absrel = absrel(center_crop_half(aligned_full), center_crop_half(gt));

  // Local least squares: crop first, fit on the crop.
  const DepthGrid pred_c = center_crop_half(pred);
  const DepthGrid gt_c = center_crop_half(gt);
  const AffineFit local_fit = fit_scale_shift(pred_c, gt_c);
  const double local_absrel = absrel(apply_affine(pred_c, local_fit), gt_c);

  return {global_absrel, local_absrel};
}

}  // namespace depthlab::metrics
