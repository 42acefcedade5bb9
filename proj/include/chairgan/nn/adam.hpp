#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/nn/layer.hpp"

namespace chairgan::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are bound to parameters by
/// position, so the same parameter list order must be used on every step.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  void set_config(const AdamConfig& cfg) { cfg_ = cfg; }
  std::uint64_t steps() const { return t_; }

  void step(const std::vector<ParamRef<T>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.param->size(), T(0));
        v_.emplace_back(p.param->size(), T(0));
      }
    }
    if (m_.size() != params.size()) throw Error("adam: parameter list changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(cfg_.lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& value = params[k].param->value;
      const auto& grad = params[k].param->grad;
      auto& m = m_[k];
      auto& v = v_[k];
      if (m.size() != value.size()) throw Error("adam: parameter size changed between steps");
      for (std::size_t i = 0; i < value.size(); ++i) {
        const T g = grad[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
      }
    }
  }

  /// First and second moment buffers, in parameter order.
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  AdamConfig cfg_{};
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace chairgan::nn
