#include "depthlab/loss/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace depthlab::loss {
namespace {

inline double sgn(double x) { return static_cast<double>(x > 0.0) - static_cast<double>(x < 0.0); }

// Median / mean-absolute-deviation over a pixel subset, with the flat ids
// of the middle order statistic(s) retained for the backward pass. Ties are
// broken by pixel index so the selected ids are deterministic.
struct SubsetStats {
  double median = 0.0;
  double mad = 0.0;
  int mid_a = -1;
  int mid_b = -1;  // == mid_a for odd counts
};

SubsetStats subset_stats(const std::vector<double>& v, const std::vector<int>& ids,
                         std::vector<int>& scratch) {
  scratch = ids;
  const std::size_t n = scratch.size();
  auto byval = [&v](int a, int b) { return v[a] < v[b] || (v[a] == v[b] && a < b); };
  const std::size_t m = n / 2;
  std::nth_element(scratch.begin(), scratch.begin() + m, scratch.end(), byval);
  SubsetStats st;
  if (n % 2 == 1) {
    st.mid_a = st.mid_b = scratch[m];
    st.median = v[st.mid_a];
  } else {
    st.mid_b = scratch[m];
    st.mid_a = *std::max_element(scratch.begin(), scratch.begin() + m, byval);
    st.median = 0.5 * (v[st.mid_a] + v[st.mid_b]);
  }
  double acc = 0.0;
  for (int id : ids) acc += std::abs(v[id] - st.median);
  st.mad = acc / static_cast<double>(n);
  return st;
}

// VJP of the per-subset normalization n_i = (v_i - m) / D with m the median
// and D the mean absolute deviation. The median subgradient routes to the
// middle order statistic(s); D is differentiated through the mean-absolute
// term (its dependence on m cancels because signs balance around a median).
void norm_vjp_accum(const std::vector<double>& v, const std::vector<int>& px,
                    const SubsetStats& st, const std::vector<double>& up,
                    std::vector<double>& grad) {
  const double inv_d = 1.0 / st.mad;
  const std::size_t n = px.size();
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    s1 += up[j];
    s2 += up[j] * (v[px[j]] - st.median) * inv_d;
  }
  const double mad_coef = s2 * inv_d / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    grad[px[j]] += up[j] * inv_d - mad_coef * sgn(v[px[j]] - st.median);
  }
  if (st.mid_a == st.mid_b) {
    grad[st.mid_a] -= s1 * inv_d;
  } else {
    grad[st.mid_a] -= 0.5 * s1 * inv_d;
    grad[st.mid_b] -= 0.5 * s1 * inv_d;
  }
}

std::vector<int> joint_mask_ids(const DepthGrid& a, const DepthGrid& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeMismatchError("loss: student and teacher dims differ");
  }
  std::vector<int> ids;
  ids.reserve(a.size());
  for (int p = 0; p < static_cast<int>(a.size()); ++p) {
    if (a.valid()[p] && b.valid()[p]) ids.push_back(p);
  }
  return ids;
}

std::vector<NormContext> build_contexts_over(const std::vector<double>& ref,
                                             const std::vector<int>& universe,
                                             const std::vector<int>& levels, double eps,
                                             std::vector<int>& scratch) {
  double lo = ref[universe.front()], hi = lo;
  for (int id : universe) {
    lo = std::min(lo, ref[id]);
    hi = std::max(hi, ref[id]);
  }
  const double width = hi - lo;
  if (width <= eps) throw DegenerateDepthError("hybrid contexts: depth range is degenerate");

  std::vector<NormContext> out;
  for (int s_level : levels) {
    const double binw = width / s_level;
    std::vector<std::vector<int>> bins(s_level);
    for (int id : universe) {
      const double t = (ref[id] - lo) / binw;
      int b = static_cast<int>(std::floor(t));
      if (b > 0 && std::floor(t) == t) --b;  // interior edge ties go down
      b = std::clamp(b, 0, s_level - 1);     // top edge joins the last bin
      bins[b].push_back(id);
    }
    for (auto& bin : bins) {
      if (bin.empty()) continue;
      NormContext ctx;
      ctx.scale_level = s_level;
      if (bin.size() >= 2) {
        const SubsetStats st = subset_stats(ref, bin, scratch);
        ctx.median = st.median;
        ctx.mad = st.mad;
      }
      ctx.pixels = std::move(bin);
      if (ctx.usable(eps)) out.push_back(std::move(ctx));
    }
  }
  return out;
}

// Joint-normalization state shared by the distillation and gradient losses.
struct CtxPair {
  std::vector<int> px;
  SubsetStats s;
  SubsetStats t;
};

struct PairNorm {
  std::vector<int> joint;
  std::vector<CtxPair> ctxs;      // one entry for Global, several for Hybrid/Local
  std::vector<int> ctx_count;     // per flat pixel; Hybrid/Local only
  int used = 0;                   // pixels contributing to the loss
};

void fill_context_pairs(const DepthGrid& d_s, const DepthGrid& d_t,
                        const std::vector<int>& levels, double eps, PairNorm& pn) {
  std::vector<int> scratch;
  auto ctxs = build_contexts_over(d_t.values(), pn.joint, levels, eps, scratch);
  pn.ctx_count.assign(d_s.size(), 0);
  for (auto& ctx : ctxs) {
    CtxPair c;
    // The public context type does not carry the middle order-statistic
    // ids, so teacher statistics are recomputed alongside the student's.
    c.t = subset_stats(d_t.values(), ctx.pixels, scratch);
    c.s = subset_stats(d_s.values(), ctx.pixels, scratch);
    if (c.s.mad <= eps) continue;  // student-side degenerate context
    c.px = std::move(ctx.pixels);
    for (int id : c.px) ++pn.ctx_count[id];
    pn.ctxs.push_back(std::move(c));
  }
  pn.used = 0;
  for (int id : pn.joint) pn.used += pn.ctx_count[id] > 0;
  if (pn.used == 0) throw DegenerateDepthError("hybrid normalization: no usable context");
}

PairNorm make_pair_norm(const DepthGrid& d_s, const DepthGrid& d_t,
                        const NormStrategy& strategy) {
  PairNorm pn;
  pn.joint = joint_mask_ids(d_s, d_t);
  if (pn.joint.size() < 2) throw DisjointMasksError("loss: joint valid mask has fewer than 2 pixels");
  pn.used = static_cast<int>(pn.joint.size());

  std::vector<int> scratch;
  const double eps = strategy.epsilon;
  switch (strategy.kind) {
    case NormKind::kNone:
      break;
    case NormKind::kGlobal: {
      CtxPair c;
      c.px = pn.joint;
      c.s = subset_stats(d_s.values(), c.px, scratch);
      c.t = subset_stats(d_t.values(), c.px, scratch);
      if (c.s.mad <= eps || c.t.mad <= eps) {
        throw DegenerateDepthError("global normalization: mad at or below epsilon");
      }
      pn.ctxs.push_back(std::move(c));
      break;
    }
    case NormKind::kHybrid:
      fill_context_pairs(d_s, d_t, {1, 2, 4}, eps, pn);
      break;
    case NormKind::kLocal:
      fill_context_pairs(d_s, d_t, {4}, eps, pn);
      break;
  }
  return pn;
}

double weight_at(const std::vector<double>* w, int id) { return w ? (*w)[id] : 1.0; }

}  // namespace

const char* norm_kind_name(NormKind kind) {
  switch (kind) {
    case NormKind::kGlobal: return "global";
    case NormKind::kHybrid: return "hybrid";
    case NormKind::kLocal: return "local";
    case NormKind::kNone: return "none";
  }
  return "?";
}

NormKind norm_kind_from_name(const std::string& name) {
  if (name == "global") return NormKind::kGlobal;
  if (name == "hybrid") return NormKind::kHybrid;
  if (name == "local") return NormKind::kLocal;
  if (name == "none") return NormKind::kNone;
  throw ConfigError("unknown normalization strategy: " + name);
}

DepthGrid normalize_global(const DepthGrid& d, double epsilon) {
  std::vector<int> ids;
  ids.reserve(d.size());
  for (int p = 0; p < static_cast<int>(d.size()); ++p) {
    if (d.valid()[p]) ids.push_back(p);
  }
  if (ids.size() < 2) throw TooFewPixelsError("normalize_global: fewer than 2 valid pixels");
  std::vector<int> scratch;
  const SubsetStats st = subset_stats(d.values(), ids, scratch);
  if (st.mad <= epsilon) throw DegenerateDepthError("normalize_global: mad at or below epsilon");
  DepthGrid out = d;
  const double inv_d = 1.0 / st.mad;
  for (int id : ids) out.values()[id] = (d.values()[id] - st.median) * inv_d;
  return out;
}

std::vector<NormContext> build_hybrid_contexts(const DepthGrid& d_ref,
                                               const std::vector<int>& levels, double eps) {
  std::vector<int> ids;
  ids.reserve(d_ref.size());
  for (int p = 0; p < static_cast<int>(d_ref.size()); ++p) {
    if (d_ref.valid()[p]) ids.push_back(p);
  }
  if (ids.size() < 2) throw TooFewPixelsError("build_hybrid_contexts: fewer than 2 valid pixels");
  std::vector<int> scratch;
  return build_contexts_over(d_ref.values(), ids, levels, eps, scratch);
}

namespace {

double context_dis_value(const PairNorm& pn, const DepthGrid& d_s, const DepthGrid& d_t,
                         const std::vector<double>* pixel_weights) {
  const auto& sv = d_s.values();
  const auto& tv = d_t.values();
  double acc = 0.0;
  for (const CtxPair& c : pn.ctxs) {
    for (int id : c.px) {
      const double r = (sv[id] - c.s.median) / c.s.mad - (tv[id] - c.t.median) / c.t.mad;
      acc += weight_at(pixel_weights, id) * std::abs(r) / pn.ctx_count[id];
    }
  }
  return acc / pn.used;
}

}  // namespace

double loss_dis(const DepthGrid& d_s, const DepthGrid& d_t, const NormStrategy& strategy,
                const std::vector<double>* pixel_weights, int* pixels_used) {
  const PairNorm pn = make_pair_norm(d_s, d_t, strategy);
  if (pixels_used) *pixels_used = pn.used;
  const auto& sv = d_s.values();
  const auto& tv = d_t.values();

  double acc = 0.0;
  switch (strategy.kind) {
    case NormKind::kNone:
      for (int id : pn.joint) acc += weight_at(pixel_weights, id) * std::abs(sv[id] - tv[id]);
      return acc / pn.used;
    case NormKind::kGlobal: {
      const CtxPair& c = pn.ctxs.front();
      for (int id : c.px) {
        const double r = (sv[id] - c.s.median) / c.s.mad - (tv[id] - c.t.median) / c.t.mad;
        acc += weight_at(pixel_weights, id) * std::abs(r);
      }
      return acc / pn.used;
    }
    case NormKind::kHybrid:
    case NormKind::kLocal:
      return context_dis_value(pn, d_s, d_t, pixel_weights);
  }
  return 0.0;
}

double loss_dis_hybrid_levels(const DepthGrid& d_s, const DepthGrid& d_t,
                              const std::vector<int>& levels, double epsilon,
                              const std::vector<double>* pixel_weights, int* pixels_used) {
  PairNorm pn;
  pn.joint = joint_mask_ids(d_s, d_t);
  if (pn.joint.size() < 2) throw DisjointMasksError("loss: joint valid mask has fewer than 2 pixels");
  fill_context_pairs(d_s, d_t, levels, epsilon, pn);
  if (pixels_used) *pixels_used = pn.used;
  return context_dis_value(pn, d_s, d_t, pixel_weights);
}

double loss_dis_vjp(const DepthGrid& d_s, const DepthGrid& d_t, const NormStrategy& strategy,
                    std::vector<double>& grad_s, const std::vector<double>* pixel_weights,
                    int* pixels_used) {
  const PairNorm pn = make_pair_norm(d_s, d_t, strategy);
  if (pixels_used) *pixels_used = pn.used;
  grad_s.assign(d_s.size(), 0.0);
  const auto& sv = d_s.values();
  const auto& tv = d_t.values();
  const double inv_m = 1.0 / pn.used;

  double acc = 0.0;
  switch (strategy.kind) {
    case NormKind::kNone:
      for (int id : pn.joint) {
        const double w = weight_at(pixel_weights, id);
        const double r = sv[id] - tv[id];
        acc += w * std::abs(r);
        grad_s[id] = w * sgn(r) * inv_m;
      }
      return acc * inv_m;
    case NormKind::kGlobal:
    case NormKind::kHybrid:
    case NormKind::kLocal: {
      std::vector<double> up;
      for (const CtxPair& c : pn.ctxs) {
        up.resize(c.px.size());
        for (std::size_t j = 0; j < c.px.size(); ++j) {
          const int id = c.px[j];
          const double r = (sv[id] - c.s.median) / c.s.mad - (tv[id] - c.t.median) / c.t.mad;
          const double share =
              strategy.kind == NormKind::kGlobal ? 1.0 : 1.0 / pn.ctx_count[id];
          const double w = weight_at(pixel_weights, id);
          acc += w * std::abs(r) * share;
          up[j] = w * sgn(r) * share * inv_m;
        }
        norm_vjp_accum(sv, c.px, c.s, up, grad_s);
      }
      return acc * inv_m;
    }
  }
  return 0.0;
}

namespace {

// Normalized difference R of a map pair under a strategy, on the full grid
// layout. Pixels outside the joint mask (or without a usable context) are
// invalid. Also returns the PairNorm so a VJP can be run afterwards.
DepthGrid normalized_diff(const DepthGrid& d_s, const DepthGrid& d_t, const PairNorm& pn,
                          const NormStrategy& strategy) {
  DepthGrid r(d_s.height(), d_s.width(), 0.0, false);
  const auto& sv = d_s.values();
  const auto& tv = d_t.values();
  switch (strategy.kind) {
    case NormKind::kNone:
      for (int id : pn.joint) {
        r.values()[id] = sv[id] - tv[id];
        r.valid()[id] = 1;
      }
      break;
    case NormKind::kGlobal: {
      const CtxPair& c = pn.ctxs.front();
      for (int id : c.px) {
        r.values()[id] = (sv[id] - c.s.median) / c.s.mad - (tv[id] - c.t.median) / c.t.mad;
        r.valid()[id] = 1;
      }
      break;
    }
    case NormKind::kHybrid:
    case NormKind::kLocal: {
      for (const CtxPair& c : pn.ctxs) {
        for (int id : c.px) {
          r.values()[id] += (sv[id] - c.s.median) / c.s.mad - (tv[id] - c.t.median) / c.t.mad;
        }
      }
      for (int id : pn.joint) {
        if (pn.ctx_count[id] > 0) {
          r.values()[id] /= pn.ctx_count[id];
          r.valid()[id] = 1;
        }
      }
      break;
    }
  }
  return r;
}

struct LevelTerm {
  double value = 0.0;
  int n_x = 0;
  int n_y = 0;
};

LevelTerm level_gradient_term(const DepthGrid& g) {
  LevelTerm t;
  double ax = 0.0, ay = 0.0;
  for (int i = 0; i < g.height(); ++i) {
    for (int j = 0; j + 1 < g.width(); ++j) {
      if (g.is_valid(i, j) && g.is_valid(i, j + 1)) {
        ax += std::abs(g.at(i, j + 1) - g.at(i, j));
        ++t.n_x;
      }
    }
  }
  for (int i = 0; i + 1 < g.height(); ++i) {
    for (int j = 0; j < g.width(); ++j) {
      if (g.is_valid(i, j) && g.is_valid(i + 1, j)) {
        ay += std::abs(g.at(i + 1, j) - g.at(i, j));
        ++t.n_y;
      }
    }
  }
  t.value = (t.n_x > 0 ? ax / t.n_x : 0.0) + (t.n_y > 0 ? ay / t.n_y : 0.0);
  return t;
}

}  // namespace

double loss_grad(const DepthGrid& d_s, const DepthGrid& d_t, const NormStrategy& strategy,
                 int scales) {
  const PairNorm pn = make_pair_norm(d_s, d_t, strategy);
  const DepthGrid r = normalized_diff(d_s, d_t, pn, strategy);
  const auto pyr = downsample_pyramid(r, scales);
  double acc = 0.0;
  for (const auto& level : pyr) acc += level_gradient_term(level).value;
  return acc / scales;
}

double loss_grad_vjp(const DepthGrid& d_s, const DepthGrid& d_t, const NormStrategy& strategy,
                     std::vector<double>& grad_s, int scales) {
  const PairNorm pn = make_pair_norm(d_s, d_t, strategy);
  const DepthGrid r = normalized_diff(d_s, d_t, pn, strategy);
  const auto pyr = downsample_pyramid(r, scales);

  double acc = 0.0;
  std::vector<std::vector<double>> g(pyr.size());
  for (std::size_t k = 0; k < pyr.size(); ++k) {
    const DepthGrid& level = pyr[k];
    g[k].assign(level.size(), 0.0);
    const LevelTerm t = level_gradient_term(level);
    acc += t.value;
    const double cx = t.n_x > 0 ? 1.0 / (scales * static_cast<double>(t.n_x)) : 0.0;
    const double cy = t.n_y > 0 ? 1.0 / (scales * static_cast<double>(t.n_y)) : 0.0;
    for (int i = 0; i < level.height(); ++i) {
      for (int j = 0; j + 1 < level.width(); ++j) {
        if (level.is_valid(i, j) && level.is_valid(i, j + 1)) {
          const double s = sgn(level.at(i, j + 1) - level.at(i, j)) * cx;
          g[k][level.idx(i, j + 1)] += s;
          g[k][level.idx(i, j)] -= s;
        }
      }
    }
    for (int i = 0; i + 1 < level.height(); ++i) {
      for (int j = 0; j < level.width(); ++j) {
        if (level.is_valid(i, j) && level.is_valid(i + 1, j)) {
          const double s = sgn(level.at(i + 1, j) - level.at(i, j)) * cy;
          g[k][level.idx(i + 1, j)] += s;
          g[k][level.idx(i, j)] -= s;
        }
      }
    }
  }

  // Pooling adjoint: each pooled cell spreads its gradient over the valid
  // pixels it averaged.
  for (std::size_t k = pyr.size() - 1; k >= 1; --k) {
    const DepthGrid& coarse = pyr[k];
    const DepthGrid& fine = pyr[k - 1];
    for (int i = 0; i < coarse.height(); ++i) {
      for (int j = 0; j < coarse.width(); ++j) {
        if (!coarse.is_valid(i, j)) continue;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) n += fine.is_valid(2 * i + dy, 2 * j + dx);
        const double share = g[k][coarse.idx(i, j)] / n;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            if (fine.is_valid(2 * i + dy, 2 * j + dx)) {
              g[k - 1][fine.idx(2 * i + dy, 2 * j + dx)] += share;
            }
          }
        }
      }
    }
  }

  // Through the normalized difference into the student map.
  grad_s.assign(d_s.size(), 0.0);
  const auto& sv = d_s.values();
  switch (strategy.kind) {
    case NormKind::kNone:
      for (int id : pn.joint) grad_s[id] = g[0][id];
      break;
    case NormKind::kGlobal: {
      const CtxPair& c = pn.ctxs.front();
      std::vector<double> up(c.px.size());
      for (std::size_t j = 0; j < c.px.size(); ++j) up[j] = g[0][c.px[j]];
      norm_vjp_accum(sv, c.px, c.s, up, grad_s);
      break;
    }
    case NormKind::kHybrid:
    case NormKind::kLocal: {
      std::vector<double> up;
      for (const CtxPair& c : pn.ctxs) {
        up.resize(c.px.size());
        for (std::size_t j = 0; j < c.px.size(); ++j) {
          up[j] = g[0][c.px[j]] / pn.ctx_count[c.px[j]];
        }
        norm_vjp_accum(sv, c.px, c.s, up, grad_s);
      }
      break;
    }
  }
  return acc / scales;
}

double loss_feat(const FeatureGrid& f_s, const FeatureGrid& f_t) {
  if (f_s.height() != f_t.height() || f_s.width() != f_t.width() ||
      f_s.channels() != f_t.channels()) {
    throw ShapeMismatchError("loss_feat: feature dims differ");
  }
  double acc = 0.0;
  int count = 0;
  for (int i = 0; i < f_s.height(); ++i) {
    for (int j = 0; j < f_s.width(); ++j) {
      double aa = 0.0, bb = 0.0, ab = 0.0;
      for (int c = 0; c < f_s.channels(); ++c) {
        const double a = f_s.at(c, i, j), b = f_t.at(c, i, j);
        aa += a * a;
        bb += b * b;
        ab += a * b;
      }
      if (aa == 0.0 || bb == 0.0) continue;
      acc += 1.0 - ab / std::sqrt(aa * bb);
      ++count;
    }
  }
  return count > 0 ? acc / count : 0.0;
}

double loss_feat_vjp(const FeatureGrid& f_s, const FeatureGrid& f_t,
                     std::vector<double>& grad_fs) {
  if (f_s.height() != f_t.height() || f_s.width() != f_t.width() ||
      f_s.channels() != f_t.channels()) {
    throw ShapeMismatchError("loss_feat: feature dims differ");
  }
  grad_fs.assign(f_s.values().size(), 0.0);
  // Two passes: the location count is needed before gradients can be scaled.
  int count = 0;
  for (int i = 0; i < f_s.height(); ++i) {
    for (int j = 0; j < f_s.width(); ++j) {
      double aa = 0.0, bb = 0.0;
      for (int c = 0; c < f_s.channels(); ++c) {
        aa += f_s.at(c, i, j) * f_s.at(c, i, j);
        bb += f_t.at(c, i, j) * f_t.at(c, i, j);
      }
      count += aa != 0.0 && bb != 0.0;
    }
  }
  if (count == 0) return 0.0;

  double acc = 0.0;
  const double inv_n = 1.0 / count;
  for (int i = 0; i < f_s.height(); ++i) {
    for (int j = 0; j < f_s.width(); ++j) {
      double aa = 0.0, bb = 0.0, ab = 0.0;
      for (int c = 0; c < f_s.channels(); ++c) {
        const double a = f_s.at(c, i, j), b = f_t.at(c, i, j);
        aa += a * a;
        bb += b * b;
        ab += a * b;
      }
      if (aa == 0.0 || bb == 0.0) continue;
      const double na = std::sqrt(aa), nb = std::sqrt(bb);
      const double cosv = ab / (na * nb);
      acc += 1.0 - cosv;
      for (int c = 0; c < f_s.channels(); ++c) {
        const double a = f_s.at(c, i, j), b = f_t.at(c, i, j);
        grad_fs[f_s.idx(c, i, j)] += (cosv * a / aa - b / (na * nb)) * inv_n;
      }
    }
  }
  return acc * inv_n;
}

}  // namespace depthlab::loss
