#pragma once

#include <string>
#include <vector>

#include "depthlab/core/grid.hpp"

namespace depthlab::loss {

enum class NormKind { kGlobal, kHybrid, kLocal, kNone };

struct NormStrategy {
  NormKind kind = NormKind::kHybrid;
  double epsilon = 1e-6;  // absolute MAD floor below which a context is degenerate
};

const char* norm_kind_name(NormKind kind);
NormKind norm_kind_from_name(const std::string& name);

// A pixel subset with the reference-map statistics used to normalize
// within it. scale_level is the S the context was built at.
struct NormContext {
  std::vector<int> pixels;  // flat row-major indices
  double median = 0.0;
  double mad = 0.0;
  int scale_level = 1;

  bool usable(double eps) const { return pixels.size() >= 2 && mad > eps; }
};

struct LossBreakdown {
  double dis = 0.0;
  double feat = 0.0;
  double grad = 0.0;
  double total = 0.0;
  int pixels_used = 0;
};

// Scale-and-shift invariant normalization over the grid's own valid mask:
// (d_i - med) / mad with mad the mean absolute deviation from the median.
// Median of an even count is the mean of the two middle order statistics.
// Throws TooFewPixelsError (<2 valid) or DegenerateDepthError (mad <= eps).
DepthGrid normalize_global(const DepthGrid& d, double epsilon = 1e-6);

// Splits the valid depth range of d_ref into S equal-width bins for each
// requested S and forms one context per non-empty bin. Ties at interior bin
// edges go to the lower bin; the top edge belongs to the last bin. Contexts
// with fewer than 2 pixels or reference mad <= eps are dropped. Throws
// DegenerateDepthError when the range width is <= eps.
std::vector<NormContext> build_hybrid_contexts(const DepthGrid& d_ref,
                                               const std::vector<int>& levels,
                                               double eps);

// Distillation term between a student and a teacher map under the given
// normalization strategy, averaged over the jointly valid pixels:
//   Global: mean |n(s)_i - n(t)_i|, each map normalized over the joint mask.
//   Hybrid: contexts built from the teacher at S in {1,2,4}; per pixel the
//           loss averages |N_u(s)_i - N_u(t)_i| over the pixel's usable
//           contexts, with per-map statistics inside each context. Pixels
//           with no usable context are excluded.
//   Local:  hybrid restricted to S = 4.
//   None:   mean |s_i - t_i|.
// Contexts are built over the joint mask; a context is dropped when either
// map's mad within it falls below the epsilon floor. `pixel_weights`, when
// given, multiplies the per-pixel loss before averaging. Reports the number
// of pixels that contributed through `pixels_used`.
double loss_dis(const DepthGrid& d_s, const DepthGrid& d_t, const NormStrategy& strategy,
                const std::vector<double>* pixel_weights = nullptr,
                int* pixels_used = nullptr);

// Context-normalized loss over caller-chosen S levels; the Hybrid and
// Local strategies are this with {1, 2, 4} and {4}.
double loss_dis_hybrid_levels(const DepthGrid& d_s, const DepthGrid& d_t,
                              const std::vector<int>& levels, double epsilon,
                              const std::vector<double>* pixel_weights = nullptr,
                              int* pixels_used = nullptr);

// Same value as loss_dis, and writes d(loss)/d(d_s) into grad_s (full grid
// layout, zero at non-contributing pixels). The normalization statistics
// are differentiated exactly: the median routes its subgradient to the
// middle order statistic(s) and the mad through the mean-absolute term, so
// the result matches central finite differences away from kinks.
double loss_dis_vjp(const DepthGrid& d_s, const DepthGrid& d_t, const NormStrategy& strategy,
                    std::vector<double>& grad_s,
                    const std::vector<double>* pixel_weights = nullptr,
                    int* pixels_used = nullptr);

// Multi-scale gradient matching on the normalized difference R (raw
// difference for kind == None): (1/K) sum_k [mean |dx R_k| + mean |dy R_k|]
// over a K-level masked mean pyramid with forward differences. Levels
// without any valid difference pair contribute zero.
double loss_grad(const DepthGrid& d_s, const DepthGrid& d_t, const NormStrategy& strategy,
                 int scales = 4);
double loss_grad_vjp(const DepthGrid& d_s, const DepthGrid& d_t, const NormStrategy& strategy,
                     std::vector<double>& grad_s, int scales = 4);

// Mean over spatial locations of (1 - cosine similarity) between the
// per-location channel vectors. Locations where either vector has zero norm
// are skipped; returns 0 when no location is evaluable.
double loss_feat(const FeatureGrid& f_s, const FeatureGrid& f_t);
double loss_feat_vjp(const FeatureGrid& f_s, const FeatureGrid& f_t,
                     std::vector<double>& grad_fs);

}  // namespace depthlab::loss
