#pragma once

#include <utility>

#include "depthlab/core/grid.hpp"

namespace depthlab::metrics {

// Least-squares affine relation fitting scale * pred + shift to gt over the
// jointly valid pixels. residual is the mean squared error after the fit.
struct AffineFit {
  double scale = 1.0;
  double shift = 0.0;
  double residual = 0.0;
};

struct MetricPair {
  double absrel = 0.0;
  double delta1 = 0.0;
};

// Closed-form normal equations over the joint mask:
//   scale = cov(pred, gt) / var(pred),  shift = mean(gt) - scale * mean(pred).
// Throws DisjointMasksError (<2 joint pixels) or DegeneratePredictionError
// (var(pred) <= 1e-12).
AffineFit fit_scale_shift(const DepthGrid& pred, const DepthGrid& gt);

// Applies scale * v + shift to the valid pixels of a grid.
DepthGrid apply_affine(const DepthGrid& grid, const AffineFit& fit);

// Mean of |pred - gt| / gt over jointly valid pixels with |gt| > 1e-9;
// pixels failing the threshold are excluded (count reported through
// `excluded` when given). Throws NoEvaluablePixelsError when nothing
// remains.
double absrel(const DepthGrid& pred_aligned, const DepthGrid& gt, int* excluded = nullptr);

// Fraction of evaluated pixels with max(pred/gt, gt/pred) < 1.25 (strict).
// Only pixels with pred > 0 and gt > 0 are evaluated; others are excluded
// and counted. Throws NoEvaluablePixelsError when nothing remains.
double delta1(const DepthGrid& pred_aligned, const DepthGrid& gt, int* excluded = nullptr);

// Convenience: scale-shift align pred to gt, then compute both metrics.
MetricPair aligned_metrics(const DepthGrid& pred, const DepthGrid& gt);

// The global-vs-local alignment comparison on the central h/2 x w/2 region
// (origin floor(h/4), floor(w/4)):
//   global: fit on the full grids, apply, crop, AbsRel on the crop;
//   local:  crop both grids first, fit on the crops, AbsRel there.
// Requires dims >= 4x4.
std::pair<double, double> fig2_experiment(const DepthGrid& pred, const DepthGrid& gt);

}  // namespace depthlab::metrics
