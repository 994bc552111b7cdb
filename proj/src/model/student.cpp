#include "depthlab/model/student.hpp"

#include <algorithm>
#include <cmath>

#include "depthlab/core/rng.hpp"

namespace depthlab::model {
namespace {

constexpr std::uint64_t kFeatureProjSeed = 0xfea70a11ce5ULL;

inline int reflect101(int t, int n) {
  if (t < 0) return -t;
  if (t >= n) return 2 * n - 2 - t;
  return t;
}

// Copies an H x W plane into an (H+2) x (W+2) buffer with reflect-101
// borders (the edge row/column is not duplicated).
void pad_plane(const double* src, int h, int w, double* dst) {
  const int pw = w + 2;
  for (int i = -1; i <= h; ++i) {
    const double* srow = src + static_cast<std::size_t>(reflect101(i, h)) * w;
    double* drow = dst + static_cast<std::size_t>(i + 1) * pw;
    drow[0] = srow[1];
    for (int j = 0; j < w; ++j) drow[j + 1] = srow[j];
    drow[w + 1] = srow[w - 2];
  }
}

// out += conv(padded, k) over the valid H x W window.
void conv3x3_accum(const double* padded, int h, int w, const double* k, double* out) {
  const int pw = w + 2;
  const double k00 = k[0], k01 = k[1], k02 = k[2];
  const double k10 = k[3], k11 = k[4], k12 = k[5];
  const double k20 = k[6], k21 = k[7], k22 = k[8];
  for (int y = 0; y < h; ++y) {
    const double* r0 = padded + static_cast<std::size_t>(y) * pw;
    const double* r1 = r0 + pw;
    const double* r2 = r1 + pw;
    double* dst = out + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      dst[x] += k00 * r0[x] + k01 * r0[x + 1] + k02 * r0[x + 2] +
                k10 * r1[x] + k11 * r1[x + 1] + k12 * r1[x + 2] +
                k20 * r2[x] + k21 * r2[x + 1] + k22 * r2[x + 2];
    }
  }
}

#if defined(__GNUC__) && !defined(__clang__)
#define DEPTHLAB_FAST_REDUCTION __attribute__((optimize("-ffast-math")))
#else
#define DEPTHLAB_FAST_REDUCTION
#endif

// grad_k[9] += correlation of go with the padded input plane. The relaxed
// floating-point mode only lets the compiler vectorize the nine reduction
// chains; the summation order is still fixed at compile time, so results
// stay run-to-run deterministic.
DEPTHLAB_FAST_REDUCTION
void conv3x3_wgrad(const double* padded, int h, int w, const double* go, double* grad_k) {
  const int pw = w + 2;
  double acc[9] = {0.0};
  for (int y = 0; y < h; ++y) {
    const double* r0 = padded + static_cast<std::size_t>(y) * pw;
    const double* r1 = r0 + pw;
    const double* r2 = r1 + pw;
    const double* g = go + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const double gv = g[x];
      acc[0] += gv * r0[x];
      acc[1] += gv * r0[x + 1];
      acc[2] += gv * r0[x + 2];
      acc[3] += gv * r1[x];
      acc[4] += gv * r1[x + 1];
      acc[5] += gv * r1[x + 2];
      acc[6] += gv * r2[x];
      acc[7] += gv * r2[x + 1];
      acc[8] += gv * r2[x + 2];
    }
  }
  for (int t = 0; t < 9; ++t) grad_k[t] += acc[t];
}

// Copies an h x w plane into the center of an (h+4) x (w+4) zero buffer.
void zero_pad2(const double* src, int h, int w, double* dst) {
  const int pw = w + 4;
  std::fill(dst, dst + static_cast<std::size_t>(h + 4) * pw, 0.0);
  for (int y = 0; y < h; ++y) {
    std::copy(src + static_cast<std::size_t>(y) * w, src + static_cast<std::size_t>(y + 1) * w,
              dst + static_cast<std::size_t>(y + 2) * pw + 2);
  }
}

// gpad += adjoint spread of go through the kernel (into padded layout).
// With go zero-padded by two rings, the scatter is the correlation of the
// buffer with the 180-degree-flipped kernel, i.e. one forward-conv pass
// over the (h+2) x (w+2) padded-gradient window.
void conv3x3_dgrad(const double* go_zp, int h, int w, const double* k, double* gpad) {
  double kflip[9];
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) kflip[a * 3 + b] = k[(2 - a) * 3 + (2 - b)];
  }
  conv3x3_accum(go_zp, h + 2, w + 2, kflip, gpad);
}

// Folds a padded-layout gradient back onto the H x W plane through the
// reflect-101 index map. `plane` is accumulated into.
void fold_padded_grad(const double* gpad, int h, int w, double* plane) {
  const int pw = w + 2;
  for (int i = -1; i <= h; ++i) {
    const int si = reflect101(i, h);
    const double* grow = gpad + static_cast<std::size_t>(i + 1) * pw;
    double* prow = plane + static_cast<std::size_t>(si) * w;
    prow[1] += grow[0];
    for (int j = 0; j < w; ++j) prow[j] += grow[j + 1];
    prow[w - 2] += grow[w + 1];
  }
}

}  // namespace

MicroStudent::MicroStudent(int in_channels) : in_channels_(in_channels) {
  const int w1 = 9 * in_channels_ * kHidden;
  const int w2 = 9 * kHidden * kHidden;
  const int w3 = 9 * kHidden;
  b1_off_ = w1;
  w2_off_ = b1_off_ + kHidden;
  b2_off_ = w2_off_ + w2;
  w3_off_ = b2_off_ + kHidden;
  b3_off_ = w3_off_ + w3;
  params_.assign(static_cast<std::size_t>(b3_off_) + 1, 0.0);

  Rng rng(kFeatureProjSeed);
  for (auto& v : feature_proj_) v = rng.gaussian() * 0.25;
}

void MicroStudent::init_he_uniform(std::uint64_t seed) {
  Rng rng(seed);
  std::fill(params_.begin(), params_.end(), 0.0);
  auto fill = [&rng, this](int off, int count, int fan_in) {
    const double limit = std::sqrt(6.0 / fan_in);
    for (int t = 0; t < count; ++t) params_[off + t] = rng.uniform(-limit, limit);
  };
  fill(0, 9 * in_channels_ * kHidden, 9 * in_channels_);
  fill(w2_off_, 9 * kHidden * kHidden, 9 * kHidden);
  fill(w3_off_, 9 * kHidden, 9 * kHidden);
}

DepthGrid MicroStudent::forward(const ImageGrid& image, Activations& acts) const {
  if (image.channels() != in_channels_) throw ShapeMismatchError("MicroStudent: channel mismatch");
  const int h = image.height(), w = image.width();
  if (h < 2 || w < 2) throw TooSmallError("MicroStudent: input must be at least 2x2");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * (w + 2);

  acts.h = h;
  acts.w = w;
  acts.input = image.values();
  acts.z1.assign(plane * kHidden, 0.0);
  acts.a1.resize(plane * kHidden);
  acts.z2.assign(plane * kHidden, 0.0);
  acts.a2.resize(plane * kHidden);

  std::vector<double> padded(pplane * std::max(in_channels_, kHidden));

  // layer 1
  for (int ci = 0; ci < in_channels_; ++ci) {
    pad_plane(acts.input.data() + ci * plane, h, w, padded.data() + ci * pplane);
  }
  for (int co = 0; co < kHidden; ++co) {
    double* z = acts.z1.data() + co * plane;
    const double b = params_[b1_off_ + co];
    for (std::size_t p = 0; p < plane; ++p) z[p] = b;
    for (int ci = 0; ci < in_channels_; ++ci) {
      conv3x3_accum(padded.data() + ci * pplane, h, w,
                    params_.data() + (co * in_channels_ + ci) * 9, z);
    }
  }
  for (std::size_t p = 0; p < acts.z1.size(); ++p) acts.a1[p] = std::max(acts.z1[p], 0.0);

  // layer 2
  for (int ci = 0; ci < kHidden; ++ci) {
    pad_plane(acts.a1.data() + ci * plane, h, w, padded.data() + ci * pplane);
  }
  for (int co = 0; co < kHidden; ++co) {
    double* z = acts.z2.data() + co * plane;
    const double b = params_[b2_off_ + co];
    for (std::size_t p = 0; p < plane; ++p) z[p] = b;
    for (int ci = 0; ci < kHidden; ++ci) {
      conv3x3_accum(padded.data() + ci * pplane, h, w,
                    params_.data() + w2_off_ + (co * kHidden + ci) * 9, z);
    }
  }
  for (std::size_t p = 0; p < acts.z2.size(); ++p) acts.a2[p] = std::max(acts.z2[p], 0.0);

  // layer 3 (no activation)
  DepthGrid out(h, w);
  {
    double* z = out.values().data();
    const double b = params_[b3_off_];
    for (std::size_t p = 0; p < plane; ++p) z[p] = b;
    for (int ci = 0; ci < kHidden; ++ci) {
      pad_plane(acts.a2.data() + ci * plane, h, w, padded.data());
      conv3x3_accum(padded.data(), h, w, params_.data() + w3_off_ + ci * 9, z);
    }
  }
  return out;
}

void MicroStudent::backward(const Activations& acts, const std::vector<double>& grad_out,
                            const std::vector<double>* grad_a2_extra,
                            std::vector<double>& grad_params) const {
  const int h = acts.h, w = acts.w;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * (w + 2);
  if (grad_out.size() != plane) throw ShapeMismatchError("backward: grad_out size mismatch");
  if (grad_params.size() != params_.size()) {
    throw ShapeMismatchError("backward: grad_params size mismatch");
  }

  const std::size_t zplane = static_cast<std::size_t>(h + 4) * (w + 4);
  std::vector<double> padded(pplane * kHidden);  // all planes of one layer at once
  std::vector<double> gpad_all(pplane * kHidden);
  std::vector<double> go_zp(zplane);
  std::vector<double> ga(plane * kHidden, 0.0);  // grad w.r.t. a2, then a1
  std::vector<double> gz(plane);

  // layer 3: out = b3 + sum_ci conv(a2_ci)
  {
    double b_acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) b_acc += grad_out[p];
    grad_params[b3_off_] += b_acc;
    for (int ci = 0; ci < kHidden; ++ci) {
      pad_plane(acts.a2.data() + ci * plane, h, w, padded.data() + ci * pplane);
    }
    std::fill(gpad_all.begin(), gpad_all.end(), 0.0);
    zero_pad2(grad_out.data(), h, w, go_zp.data());
    for (int ci = 0; ci < kHidden; ++ci) {
      conv3x3_wgrad(padded.data() + ci * pplane, h, w, grad_out.data(),
                    grad_params.data() + w3_off_ + ci * 9);
      conv3x3_dgrad(go_zp.data(), h, w, params_.data() + w3_off_ + ci * 9,
                    gpad_all.data() + ci * pplane);
    }
    for (int ci = 0; ci < kHidden; ++ci) {
      fold_padded_grad(gpad_all.data() + ci * pplane, h, w, ga.data() + ci * plane);
    }
  }
  if (grad_a2_extra) {
    for (std::size_t p = 0; p < ga.size(); ++p) ga[p] += (*grad_a2_extra)[p];
  }

  // layer 2
  std::vector<double> ga_prev(plane * kHidden, 0.0);
  for (int ci = 0; ci < kHidden; ++ci) {
    pad_plane(acts.a1.data() + ci * plane, h, w, padded.data() + ci * pplane);
  }
  std::fill(gpad_all.begin(), gpad_all.end(), 0.0);
  for (int co = 0; co < kHidden; ++co) {
    const double* z = acts.z2.data() + co * plane;
    const double* g = ga.data() + co * plane;
    double b_acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
      gz[p] = z[p] > 0.0 ? g[p] : 0.0;
      b_acc += gz[p];
    }
    grad_params[b2_off_ + co] += b_acc;
    zero_pad2(gz.data(), h, w, go_zp.data());
    for (int ci = 0; ci < kHidden; ++ci) {
      conv3x3_wgrad(padded.data() + ci * pplane, h, w, gz.data(),
                    grad_params.data() + w2_off_ + (co * kHidden + ci) * 9);
      conv3x3_dgrad(go_zp.data(), h, w, params_.data() + w2_off_ + (co * kHidden + ci) * 9,
                    gpad_all.data() + ci * pplane);
    }
  }
  for (int ci = 0; ci < kHidden; ++ci) {
    fold_padded_grad(gpad_all.data() + ci * pplane, h, w, ga_prev.data() + ci * plane);
  }

  // layer 1
  for (int ci = 0; ci < in_channels_; ++ci) {
    pad_plane(acts.input.data() + ci * plane, h, w, padded.data() + ci * pplane);
  }
  for (int co = 0; co < kHidden; ++co) {
    const double* z = acts.z1.data() + co * plane;
    const double* g = ga_prev.data() + co * plane;
    double b_acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
      gz[p] = z[p] > 0.0 ? g[p] : 0.0;
      b_acc += gz[p];
    }
    grad_params[b1_off_ + co] += b_acc;
    for (int ci = 0; ci < in_channels_; ++ci) {
      conv3x3_wgrad(padded.data() + ci * pplane, h, w, gz.data(),
                    grad_params.data() + (co * in_channels_ + ci) * 9);
    }
  }
}

FeatureGrid MicroStudent::project_features(const Activations& acts) const {
  const std::size_t plane = static_cast<std::size_t>(acts.h) * acts.w;
  FeatureGrid f(acts.h, acts.w, kFeatureChannels, 0.0);
  for (int c = 0; c < kFeatureChannels; ++c) {
    double* dst = f.values().data() + c * plane;
    for (int k = 0; k < kHidden; ++k) {
      const double wv = feature_proj_[c * kHidden + k];
      const double* src = acts.a2.data() + k * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += wv * src[p];
    }
  }
  return f;
}

void MicroStudent::project_features_vjp(const Activations& acts,
                                        const std::vector<double>& grad_feat,
                                        std::vector<double>& grad_a2) const {
  const std::size_t plane = static_cast<std::size_t>(acts.h) * acts.w;
  grad_a2.assign(plane * kHidden, 0.0);
  for (int c = 0; c < kFeatureChannels; ++c) {
    const double* g = grad_feat.data() + c * plane;
    for (int k = 0; k < kHidden; ++k) {
      const double wv = feature_proj_[c * kHidden + k];
      double* dst = grad_a2.data() + k * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += wv * g[p];
    }
  }
}

void MicroStudent::nudge_biases_for_gradcheck(const ImageGrid& probe, double margin) {
  // Per channel, shift the bias so the whole plane is either active
  // (z >= margin) or inactive (z <= -margin) on the probe. Mixed-sign
  // channels would leave exact zeros in the activations; summed over dead
  // 3x3 windows those produce bit-identical output pixels, and a median
  // taken on such a tie has no usable subgradient for a finite-difference
  // comparison. Alternating the two regimes keeps both ReLU branches in
  // play. Layer 2 is adjusted after layer 1 so its inputs are final.
  auto clear_layer = [this, margin](std::vector<double>& z, int bias_off, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < kHidden; ++c) {
      const double* zc = z.data() + c * plane;
      double lo = zc[0], hi = zc[0];
      for (std::size_t p = 1; p < plane; ++p) {
        lo = std::min(lo, zc[p]);
        hi = std::max(hi, zc[p]);
      }
      const bool activate = c % 2 == 0;
      double delta = 0.0;
      if (activate && lo < margin) delta = margin - lo;
      if (!activate && hi > -margin) delta = -margin - hi;
      params_[bias_off + c] += delta;
    }
  };

  Activations acts;
  forward(probe, acts);
  clear_layer(acts.z1, b1_off_, acts.h, acts.w);
  forward(probe, acts);
  clear_layer(acts.z2, b2_off_, acts.h, acts.w);
}

}  // namespace depthlab::model
