#include <doctest.h>

#include <cmath>

#include "depthlab/core/rng.hpp"
#include "depthlab/model/adam.hpp"
#include "depthlab/model/student.hpp"
#include "depthlab/train/gradcheck.hpp"

using namespace depthlab;
using model::MicroStudent;

namespace {

ImageGrid random_image(Rng& rng, int h, int w, int c = 3) {
  ImageGrid img(h, w, c);
  for (auto& v : img.values()) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("MicroStudent: parameter count and zero-parameter output") {
  MicroStudent m(3);
  CHECK(m.param_count() == 3 * 3 * 3 * 16 + 16 + 3 * 3 * 16 * 16 + 16 + 3 * 3 * 16 + 1);

  Rng rng(1);
  const ImageGrid img = random_image(rng, 6, 5);
  MicroStudent::Activations acts;
  const DepthGrid out = m.forward(img, acts);  // all parameters zero
  for (double v : out.values()) CHECK(v == 0.0);

  m.params()[m.b3_offset()] = 2.5;
  const DepthGrid biased = m.forward(img, acts);
  for (double v : biased.values()) CHECK(v == 2.5);
}

TEST_CASE("MicroStudent: deterministic forward, dims preserved") {
  MicroStudent m(3);
  m.init_he_uniform(7);
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 2 + static_cast<int>(rng.uniform_int(0, 14));
    const int w = 2 + static_cast<int>(rng.uniform_int(0, 14));
    const ImageGrid img = random_image(rng, h, w);
    MicroStudent::Activations acts;
    const DepthGrid a = m.forward(img, acts);
    const DepthGrid b = m.forward(img, acts);
    CHECK(a.height() == h);
    CHECK(a.width() == w);
    CHECK(a.values() == b.values());
  }

  const ImageGrid wrong(4, 4, 1);
  MicroStudent::Activations acts;
  CHECK_THROWS_AS(m.forward(wrong, acts), ShapeMismatchError);
}

TEST_CASE("MicroStudent: zero upstream gradient gives zero parameter gradient") {
  MicroStudent m(3);
  m.init_he_uniform(11);
  Rng rng(3);
  const ImageGrid img = random_image(rng, 6, 6);
  MicroStudent::Activations acts;
  m.forward(img, acts);
  std::vector<double> go(36, 0.0), gp(m.param_count(), 0.0);
  m.backward(acts, go, nullptr, gp);
  for (double g : gp) CHECK(g == 0.0);
}

TEST_CASE("MicroStudent: single-pixel L1 sign rule via finite differences") {
  MicroStudent m(3);
  m.init_he_uniform(13);
  Rng rng(4);
  const ImageGrid img = random_image(rng, 5, 5);
  MicroStudent::Activations acts;
  const DepthGrid out = m.forward(img, acts);
  const int py = 2, px = 3;
  const double target = out.at(py, px) - 1.0;  // pred > target, so d|.|/dpred = +1

  std::vector<double> go(25, 0.0), gp(m.param_count(), 0.0);
  go[py * 5 + px] = 1.0;  // gradient of pred scaled by +1
  m.backward(acts, go, nullptr, gp);

  const double h = 1e-6;
  Rng pick(5);
  for (int t = 0; t < 24; ++t) {
    const int i = static_cast<int>(pick.uniform_int(0, m.param_count() - 1));
    const double saved = m.params()[i];
    m.params()[i] = saved + h;
    const double up = std::abs(m.forward(img, acts).at(py, px) - target);
    m.params()[i] = saved - h;
    const double down = std::abs(m.forward(img, acts).at(py, px) - target);
    m.params()[i] = saved;
    CHECK(gp[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("gradcheck: analytic matches central differences on frozen instances") {
  // A fast subset; the acceptance suite runs all twelve combinations.
  for (const auto& spec : train::default_gradcheck_specs()) {
    const bool covered = (spec.strategy.kind == loss::NormKind::kHybrid &&
                          spec.shared_context && spec.local_global) ||
                         (spec.strategy.kind == loss::NormKind::kNone && !spec.shared_context);
    if (!covered) continue;
    const auto report = train::run_gradcheck(spec);
    INFO("strategy ", loss::norm_kind_name(spec.strategy.kind), " worst ", report.worst_param,
         " analytic ", report.analytic_at_worst, " fd ", report.fd_at_worst);
    CHECK(report.max_rel < 1e-4);
  }
}

TEST_CASE("Adam: first step follows the closed form") {
  model::AdamConfig cfg;
  model::Adam opt(4, cfg);
  std::vector<double> params{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> grad{0.3, -0.7, 0.01, 4.0};
  const std::vector<double> before = params;
  opt.step(params, grad);
  for (int i = 0; i < 4; ++i) {
    const double expected = before[i] - cfg.lr * grad[i] / (std::abs(grad[i]) + cfg.eps);
    CHECK(params[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(opt.steps() == 1);
}

TEST_CASE("Adam: constant gradient keeps moving parameters the same way") {
  model::Adam opt(2, {});
  std::vector<double> params{0.0, 1.0};
  const std::vector<double> grad{1.0, -0.2};
  for (int t = 0; t < 5; ++t) {
    const std::vector<double> before = params;
    opt.step(params, grad);
    CHECK(params[0] < before[0]);
    CHECK(params[1] > before[1]);
  }
}

TEST_CASE("feature projection adjoint is consistent") {
  MicroStudent m(3);
  m.init_he_uniform(17);
  Rng rng(6);
  const ImageGrid img = random_image(rng, 4, 4);
  MicroStudent::Activations acts;
  m.forward(img, acts);
  const FeatureGrid f = m.project_features(acts);
  REQUIRE(f.channels() == MicroStudent::kFeatureChannels);

  // <P a2, g> == <a2, P^T g> for random g.
  std::vector<double> g(f.values().size());
  for (auto& v : g) v = rng.uniform(-1.0, 1.0);
  std::vector<double> ga2;
  m.project_features_vjp(acts, g, ga2);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) lhs += f.values()[p] * g[p];
  for (std::size_t p = 0; p < ga2.size(); ++p) rhs += acts.a2[p] * ga2[p];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
