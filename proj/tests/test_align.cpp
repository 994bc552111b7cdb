#include <doctest.h>

#include <cmath>

#include "depthlab/core/rng.hpp"
#include "depthlab/metrics/align.hpp"

using namespace depthlab;
using namespace depthlab::metrics;

namespace {

DepthGrid random_positive(Rng& rng, int h, int w) {
  DepthGrid g(h, w);
  for (auto& v : g.values()) v = rng.uniform(0.5, 5.0);
  return g;
}

}  // namespace

TEST_CASE("fit_scale_shift: identity and planted affine") {
  Rng rng(3);
  const DepthGrid gt = random_positive(rng, 5, 5);

  const AffineFit id = fit_scale_shift(gt, gt);
  CHECK(id.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.shift == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(id.residual < 1e-18);

  DepthGrid pred = gt;
  for (auto& v : pred.values()) v = 2.0 * v + 3.0;
  const AffineFit fit = fit_scale_shift(pred, gt);
  CHECK(fit.scale == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.shift == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(fit.residual < 1e-18);

  CHECK_THROWS_AS(fit_scale_shift(DepthGrid(5, 5, 2.0), gt), DegeneratePredictionError);
}

TEST_CASE("fit_scale_shift: exact on noiseless affine relations") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const DepthGrid gt = random_positive(rng, 6, 6);
    double a = rng.uniform(-4.0, 4.0);
    if (std::abs(a) < 1e-6) a = 1e-3;
    const double b = rng.uniform(-5.0, 5.0);
    DepthGrid pred = gt;
    for (auto& v : pred.values()) v = a * v + b;
    CHECK(fit_scale_shift(pred, gt).residual < 1e-18);
  }
}

TEST_CASE("absrel: hand examples and exclusions") {
  DepthGrid pred(1, 2), gt(1, 2);
  pred.at(0, 0) = 2;
  pred.at(0, 1) = 4;
  gt.at(0, 0) = 1;
  gt.at(0, 1) = 4;
  CHECK(absrel(pred, gt) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(absrel(gt, gt) == doctest::Approx(0.0));

  DepthGrid gt_zero = gt;
  gt_zero.at(0, 1) = 0.0;  // excluded, the other pixel still evaluates
  int excluded = 0;
  CHECK(absrel(pred, gt_zero, &excluded) == doctest::Approx(1.0));
  CHECK(excluded == 1);

  DepthGrid all_zero(1, 2, 0.0);
  CHECK_THROWS_AS(absrel(pred, all_zero), NoEvaluablePixelsError);
}

TEST_CASE("delta1: boundary strictness and counting") {
  DepthGrid pred(1, 1, 1.25), gt(1, 1, 1.0);
  CHECK(delta1(pred, gt) == doctest::Approx(0.0));  // ratio exactly 1.25 fails

  DepthGrid p2(1, 2), g2(1, 2, 1.0);
  p2.at(0, 0) = 1.2;
  p2.at(0, 1) = 2.0;
  CHECK(delta1(p2, g2) == doctest::Approx(0.5));
  CHECK(delta1(g2, g2) == doctest::Approx(1.0));

  DepthGrid neg(1, 2, -1.0);
  CHECK_THROWS_AS(delta1(neg, g2), NoEvaluablePixelsError);
}

TEST_CASE("delta1 is monotone when pred moves toward gt") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const DepthGrid gt = random_positive(rng, 5, 5);
    DepthGrid pred = random_positive(rng, 5, 5);
    const double before = delta1(pred, gt);
    DepthGrid closer = pred;
    for (std::size_t p = 0; p < pred.size(); ++p) {
      closer.values()[p] = 0.5 * (pred.values()[p] + gt.values()[p]);
    }
    CHECK(delta1(closer, gt) >= before - 1e-12);
  }
}

TEST_CASE("aligned absrel is invariant to positive prescaling") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const DepthGrid gt = random_positive(rng, 6, 6);
    DepthGrid pred = random_positive(rng, 6, 6);
    const double base = aligned_metrics(pred, gt).absrel;
    DepthGrid scaled = pred;
    const double c = rng.uniform(0.05, 20.0);
    for (auto& v : scaled.values()) v *= c;
    CHECK(aligned_metrics(scaled, gt).absrel == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("fig2_experiment: identities and warp direction") {
  Rng rng(17);
  const DepthGrid gt = random_positive(rng, 16, 16);
  const auto [g0, l0] = fig2_experiment(gt, gt);
  CHECK(g0 == doctest::Approx(0.0));
  CHECK(l0 == doctest::Approx(0.0));

  // A spatially uniform affine error is fully correctable by both fits.
  DepthGrid affine = gt;
  for (auto& v : affine.values()) v = 1.7 * v + 0.9;
  const auto [ga, la] = fig2_experiment(affine, gt);
  CHECK(ga == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(la == doctest::Approx(0.0).epsilon(1e-10));

  // A low-frequency multiplicative warp: the global fit cannot adapt to the
  // spatially varying scale, the local fit can.
  DepthGrid warped = gt;
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      const double u = j / 15.0, v = i / 15.0;
      warped.at(i, j) *= 1.0 + 0.3 * std::sin(3.0 * u + 2.0 * v);
    }
  }
  const auto [gw, lw] = fig2_experiment(warped, gt);
  CHECK(lw < gw);

  CHECK_THROWS_AS(fig2_experiment(DepthGrid(3, 3, 1.0), DepthGrid(3, 3, 1.0)), TooSmallError);
}

TEST_CASE("fig2_experiment: per-region affine family keeps local <= global") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const DepthGrid gt = random_positive(rng, 12, 12);
    DepthGrid pred = gt;
    // Region-varying affine: distinct coefficients inside/outside the
    // central crop. Local alignment removes the inner pair exactly.
    const double a_in = rng.uniform(0.5, 2.0), b_in = rng.uniform(-1.0, 1.0);
    const double a_out = rng.uniform(0.5, 2.0), b_out = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 12; ++i) {
      for (int j = 0; j < 12; ++j) {
        const bool inside = i >= 3 && i < 9 && j >= 3 && j < 9;
        pred.at(i, j) = inside ? a_in * gt.at(i, j) + b_in : a_out * gt.at(i, j) + b_out;
      }
    }
    const auto [g, l] = fig2_experiment(pred, gt);
    CHECK(l <= g + 1e-12);
    CHECK(l == doctest::Approx(0.0).epsilon(1e-9));
  }
}
