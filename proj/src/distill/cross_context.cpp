#include "depthlab/distill/cross_context.hpp"

#include <cmath>

namespace depthlab::distill {
namespace {

struct Tap {
  int lo;
  int hi;
  double w_hi;
};

Tap make_tap(double coord, int n) {
  Tap t;
  const double fl = std::floor(coord);
  t.lo = static_cast<int>(fl);
  if (t.lo < 0) {  // guard against -0.0-style rounding; coords are in range
    t.lo = 0;
    t.hi = 0;
    t.w_hi = 0.0;
  } else if (t.lo >= n - 1) {
    t.lo = n - 1;
    t.hi = n - 1;
    t.w_hi = 0.0;
  } else {
    t.hi = t.lo + 1;
    t.w_hi = coord - fl;
  }
  return t;
}

inline double patch_coord(int i, int out_side, int patch_side) {
  if (out_side == 1) return 0.5 * (patch_side - 1);
  return static_cast<double>(i) * (patch_side - 1) / (out_side - 1);
}

}  // namespace

DepthGrid sample_patch_from_global(const DepthGrid& student_global, const CropRect& rect,
                                   int region_side, int out_side) {
  if (region_side < 2) throw TooSmallError("sample_patch_from_global: region side must be >= 2");
  if (rect.x0 < 0 || rect.y0 < 0 || rect.side < 1 || rect.x0 + rect.side > region_side ||
      rect.y0 + rect.side > region_side) {
    throw OutOfBoundsError("sample_patch_from_global: rect outside the global region");
  }
  const double sy = static_cast<double>(student_global.height() - 1) / (region_side - 1);
  const double sx = static_cast<double>(student_global.width() - 1) / (region_side - 1);
  DepthGrid out(out_side, out_side);
  for (int i = 0; i < out_side; ++i) {
    const Tap ty = make_tap((rect.y0 + patch_coord(i, out_side, rect.side)) * sy,
                            student_global.height());
    for (int j = 0; j < out_side; ++j) {
      const Tap tx = make_tap((rect.x0 + patch_coord(j, out_side, rect.side)) * sx,
                              student_global.width());
      const double w00 = (1.0 - ty.w_hi) * (1.0 - tx.w_hi);
      const double w01 = (1.0 - ty.w_hi) * tx.w_hi;
      const double w10 = ty.w_hi * (1.0 - tx.w_hi);
      const double w11 = ty.w_hi * tx.w_hi;
      bool ok = true;
      if (w00 > 0.0) ok &= student_global.is_valid(ty.lo, tx.lo);
      if (w01 > 0.0) ok &= student_global.is_valid(ty.lo, tx.hi);
      if (w10 > 0.0) ok &= student_global.is_valid(ty.hi, tx.lo);
      if (w11 > 0.0) ok &= student_global.is_valid(ty.hi, tx.hi);
      if (ok) {
        out.at(i, j) = w00 * student_global.at(ty.lo, tx.lo) +
                       w01 * student_global.at(ty.lo, tx.hi) +
                       w10 * student_global.at(ty.hi, tx.lo) +
                       w11 * student_global.at(ty.hi, tx.hi);
      } else {
        out.at(i, j) = 0.0;
        out.set_valid(i, j, false);
      }
    }
  }
  return out;
}

void sample_patch_from_global_vjp(const CropRect& rect, int region_side, int out_side,
                                  int global_h, int global_w,
                                  const std::vector<double>& upstream,
                                  std::vector<double>& grad_global) {
  const double sy = static_cast<double>(global_h - 1) / (region_side - 1);
  const double sx = static_cast<double>(global_w - 1) / (region_side - 1);
  for (int i = 0; i < out_side; ++i) {
    const Tap ty = make_tap((rect.y0 + patch_coord(i, out_side, rect.side)) * sy, global_h);
    for (int j = 0; j < out_side; ++j) {
      const double u = upstream[static_cast<std::size_t>(i) * out_side + j];
      if (u == 0.0) continue;
      const Tap tx = make_tap((rect.x0 + patch_coord(j, out_side, rect.side)) * sx, global_w);
      grad_global[static_cast<std::size_t>(ty.lo) * global_w + tx.lo] +=
          u * (1.0 - ty.w_hi) * (1.0 - tx.w_hi);
      grad_global[static_cast<std::size_t>(ty.lo) * global_w + tx.hi] +=
          u * (1.0 - ty.w_hi) * tx.w_hi;
      grad_global[static_cast<std::size_t>(ty.hi) * global_w + tx.lo] +=
          u * ty.w_hi * (1.0 - tx.w_hi);
      grad_global[static_cast<std::size_t>(ty.hi) * global_w + tx.hi] +=
          u * ty.w_hi * tx.w_hi;
    }
  }
}

loss::LossBreakdown loss_shared_context(RegionPredictor& student, RegionPredictor& teacher,
                                        const ImageGrid& image, const CropPlan& plan,
                                        const loss::NormStrategy& strategy,
                                        const LossWeights& weights, int grad_scales) {
  const auto sp = student.predict(image, plan.global_rect, plan.model_input_side, true);
  const auto tp = teacher.predict(image, plan.global_rect, plan.model_input_side, true);

  loss::LossBreakdown out;
  out.dis = loss::loss_dis(sp.depth, tp.depth, strategy, nullptr, &out.pixels_used);
  out.grad = loss::loss_grad(sp.depth, tp.depth, strategy, grad_scales);
  if (!sp.features.empty() && !tp.features.empty()) {
    out.feat = loss::loss_feat(sp.features, tp.features);
  }
  out.total = out.dis + weights.lambda2 * out.feat + weights.lambda3 * out.grad;
  return out;
}

loss::LossBreakdown loss_local_global(RegionPredictor& student, RegionPredictor& teacher,
                                      const ImageGrid& image, const CropPlan& plan,
                                      const loss::NormStrategy& strategy) {
  if (plan.local_rects.empty()) throw ConfigError("loss_local_global: no local rects in plan");
  const int m = plan.model_input_side;
  const DepthGrid student_global = student.predict(image, plan.global_rect, m, false).depth;

  loss::LossBreakdown out;
  for (const CropRect& r : plan.local_rects) {
    const CropRect in_image{plan.global_rect.x0 + r.x0, plan.global_rect.y0 + r.y0, r.side};
    const DepthGrid label = teacher.predict(image, in_image, m, false).depth;
    const DepthGrid patch = sample_patch_from_global(student_global, r, plan.global_rect.side, m);
    int used = 0;
    out.dis += loss::loss_dis(patch, label, strategy, nullptr, &used);
    out.pixels_used += used;
  }
  out.dis /= static_cast<double>(plan.local_rects.size());
  out.total = out.dis;
  return out;
}

double loss_total(const loss::LossBreakdown* sc, const loss::LossBreakdown* lg,
                  const LossWeights& w) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(w.lambda1) || !finite(w.lambda2) || !finite(w.lambda3) || w.lambda1 < 0.0 ||
      w.lambda2 < 0.0 || w.lambda3 < 0.0) {
    throw NonFiniteError("loss_total: invalid weights");
  }
  double total = 0.0;
  if (sc) {
    if (!finite(sc->dis) || !finite(sc->feat) || !finite(sc->grad)) {
      throw NonFiniteError("loss_total: non-finite shared-context part");
    }
    total += sc->dis + w.lambda2 * sc->feat + w.lambda3 * sc->grad;
  }
  if (lg) {
    if (!finite(lg->dis)) throw NonFiniteError("loss_total: non-finite local-global part");
    total += w.lambda1 * lg->dis;
  }
  return total;
}

}  // namespace depthlab::distill
