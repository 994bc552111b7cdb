#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "depthlab/core/error.hpp"

namespace depthlab::model {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Deterministic Adam with bias correction; moment vectors start at zero.
class Adam {
 public:
  explicit Adam(std::size_t n, const AdamConfig& cfg = {})
      : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw ShapeMismatchError("Adam: size mismatch");
    }
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, step_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, step_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<double>& m() const { return m_; }
  const std::vector<double>& v() const { return v_; }
  std::vector<double>& m() { return m_; }
  std::vector<double>& v() { return v_; }
  void set_steps(std::int64_t s) { step_ = s; }

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace depthlab::model
