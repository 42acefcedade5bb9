#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/nn/conv.hpp"
#include "chairgan/nn/layer.hpp"

namespace chairgan::nn {

/// Per-channel batch normalization. Training mode normalizes with batch
/// statistics and updates running estimates; inference mode uses the running
/// estimates only, so outputs do not depend on batch composition.
template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5, double gamma_std = 0.02)
      : c_(channels), momentum_(momentum), eps_(eps), gamma_std_(gamma_std), gamma_(channels), beta_(channels),
        running_mean_(channels), running_var_(channels) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
    std::fill(running_var_.value.begin(), running_var_.value.end(), T(1));
  }

  std::string kind() const override { return "batch_norm2d"; }
  Shape4 output_shape(Shape4 in) const override { return in; }

  void init(Rng& rng) override {
    for (auto& g : gamma_.value) g = static_cast<T>(gamma_std_ > 0 ? rng.normal(1.0, gamma_std_) : 1.0);
    std::fill(beta_.value.begin(), beta_.value.end(), T(0));
    std::fill(running_mean_.value.begin(), running_mean_.value.end(), T(0));
    std::fill(running_var_.value.begin(), running_var_.value.end(), T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (x.c() != c_) throw ShapeError("batch_norm2d: channel mismatch " + x.shape().str());
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    const std::size_t count = plane * static_cast<std::size_t>(x.n());
    Tensor<T> y(x.shape());
    train_ = mode == Mode::Train;
    inv_std_.assign(static_cast<std::size_t>(c_), T(0));
    if (train_) {
      if (count < 2) throw ShapeError("batch_norm2d: training needs more than one value per channel");
      xhat_ = Tensor<T>(x.shape());
      for (int c = 0; c < c_; ++c) {
        double sum = 0.0;
        for (int n = 0; n < x.n(); ++n) {
          const T* p = x.sample(n).data() + c * plane;
          for (std::size_t j = 0; j < plane; ++j) sum += static_cast<double>(p[j]);
        }
        const double mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (int n = 0; n < x.n(); ++n) {
          const T* p = x.sample(n).data() + c * plane;
          for (std::size_t j = 0; j < plane; ++j) {
            const double d = static_cast<double>(p[j]) - mean;
            sq += d * d;
          }
        }
        const double var = sq / static_cast<double>(count);
        const T istd = static_cast<T>(1.0 / std::sqrt(var + eps_));
        inv_std_[static_cast<std::size_t>(c)] = istd;
        const T m = static_cast<T>(mean);
        const T g = gamma_.value[static_cast<std::size_t>(c)], b = beta_.value[static_cast<std::size_t>(c)];
        for (int n = 0; n < x.n(); ++n) {
          const T* p = x.sample(n).data() + c * plane;
          T* xh = xhat_.sample(n).data() + c * plane;
          T* q = y.sample(n).data() + c * plane;
          for (std::size_t j = 0; j < plane; ++j) {
            xh[j] = (p[j] - m) * istd;
            q[j] = g * xh[j] + b;
          }
        }
        auto& rm = running_mean_.value[static_cast<std::size_t>(c)];
        auto& rv = running_var_.value[static_cast<std::size_t>(c)];
        const double unbiased = sq / static_cast<double>(count - 1);
        rm = static_cast<T>((1.0 - momentum_) * static_cast<double>(rm) + momentum_ * mean);
        rv = static_cast<T>((1.0 - momentum_) * static_cast<double>(rv) + momentum_ * unbiased);
      }
    } else {
      for (int c = 0; c < c_; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const T istd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_.value[ci]) + eps_));
        inv_std_[ci] = istd;
        const T scale = gamma_.value[ci] * istd;
        const T shift = beta_.value[ci] - running_mean_.value[ci] * scale;
        for (int n = 0; n < x.n(); ++n) {
          const T* p = x.sample(n).data() + c * plane;
          T* q = y.sample(n).data() + c * plane;
          for (std::size_t j = 0; j < plane; ++j) q[j] = p[j] * scale + shift;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx(gy.shape());
    const std::size_t plane = static_cast<std::size_t>(gy.h()) * gy.w();
    if (!train_) {
      for (int c = 0; c < c_; ++c) {
        const T s = gamma_.value[static_cast<std::size_t>(c)] * inv_std_[static_cast<std::size_t>(c)];
        for (int n = 0; n < gy.n(); ++n) {
          const T* g = gy.sample(n).data() + c * plane;
          T* q = gx.sample(n).data() + c * plane;
          for (std::size_t j = 0; j < plane; ++j) q[j] = g[j] * s;
        }
      }
      return gx;
    }
    const double count = static_cast<double>(plane) * gy.n();
    for (int c = 0; c < c_; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      double sum_g = 0.0, sum_gx = 0.0;
      for (int n = 0; n < gy.n(); ++n) {
        const T* g = gy.sample(n).data() + c * plane;
        const T* xh = xhat_.sample(n).data() + c * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          sum_g += static_cast<double>(g[j]);
          sum_gx += static_cast<double>(g[j]) * static_cast<double>(xh[j]);
        }
      }
      if (!this->frozen_) {
        gamma_.grad[ci] += static_cast<T>(sum_gx);
        beta_.grad[ci] += static_cast<T>(sum_g);
      }
      const T k = gamma_.value[ci] * inv_std_[ci];
      const T mg = static_cast<T>(sum_g / count), mgx = static_cast<T>(sum_gx / count);
      for (int n = 0; n < gy.n(); ++n) {
        const T* g = gy.sample(n).data() + c * plane;
        const T* xh = xhat_.sample(n).data() + c * plane;
        T* q = gx.sample(n).data() + c * plane;
        for (std::size_t j = 0; j < plane; ++j) q[j] = k * (g[j] - mg - xh[j] * mgx);
      }
    }
    return gx;
  }

  void collect_parameters(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "gamma", &gamma_});
    out.push_back({prefix + "beta", &beta_});
  }
  void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "running_mean", &running_mean_});
    out.push_back({prefix + "running_var", &running_var_});
  }
  void clear_cache() override { xhat_ = Tensor<T>(); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm2d>(*this); }

 private:
  int c_;
  double momentum_, eps_, gamma_std_;
  Param<T> gamma_, beta_, running_mean_, running_var_;
  bool train_ = false;
  std::vector<T> inv_std_;
  Tensor<T> xhat_;
};

/// Elementwise activation defined by a value function and a derivative
/// expressed through the cached input and output.
template <typename T, typename Fn>
class Elementwise final : public Layer<T> {
 public:
  explicit Elementwise(Fn fn = {}) : fn_(fn) {}
  std::string kind() const override { return fn_.name(); }
  Shape4 output_shape(Shape4 in) const override { return in; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = fn_.value(x[i]);
    if (mode == Mode::Train) {
      input_ = x;
      output_ = y;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (input_.size() != gy.size()) throw Error(fn_.name() + ": backward without a matching forward");
    Tensor<T> gx(gy.shape());
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * fn_.derivative(input_[i], output_[i]);
    return gx;
  }

  void clear_cache() override {
    input_ = Tensor<T>();
    output_ = Tensor<T>();
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Elementwise>(*this); }

 private:
  Fn fn_;
  Tensor<T> input_, output_;
};

struct ReluFn {
  std::string name() const { return "relu"; }
  template <typename T>
  T value(T x) const { return x > T(0) ? x : T(0); }
  template <typename T>
  T derivative(T x, T) const { return x > T(0) ? T(1) : T(0); }
};

struct LeakyReluFn {
  double slope = 0.2;
  std::string name() const { return "leaky_relu"; }
  template <typename T>
  T value(T x) const { return x > T(0) ? x : static_cast<T>(slope) * x; }
  template <typename T>
  T derivative(T x, T) const { return x > T(0) ? T(1) : static_cast<T>(slope); }
};

struct TanhFn {
  std::string name() const { return "tanh"; }
  template <typename T>
  T value(T x) const { return std::tanh(x); }
  template <typename T>
  T derivative(T, T y) const { return T(1) - y * y; }
};

struct SigmoidFn {
  std::string name() const { return "sigmoid"; }
  template <typename T>
  T value(T x) const { return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x)); }
  template <typename T>
  T derivative(T, T y) const { return y * (T(1) - y); }
};

template <typename T>
using Relu = Elementwise<T, ReluFn>;
template <typename T>
using LeakyRelu = Elementwise<T, LeakyReluFn>;
template <typename T>
using Tanh = Elementwise<T, TanhFn>;
template <typename T>
using Sigmoid = Elementwise<T, SigmoidFn>;

template <typename T>
class Reshape final : public Layer<T> {
 public:
  Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}
  std::string kind() const override { return "reshape"; }
  Shape4 output_shape(Shape4 in) const override { return {in.n, c_, h_, w_}; }
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    in_shape_ = x.shape();
    return x.reshaped(output_shape(x.shape()));
  }
  Tensor<T> backward(const Tensor<T>& gy) override { return gy.reshaped(in_shape_); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  int c_, h_, w_;
  Shape4 in_shape_{};
};

/// Sub-pixel rearrangement (C*r*r, H, W) -> (C, H*r, W*r).
template <typename T>
class PixelShuffle final : public Layer<T> {
 public:
  explicit PixelShuffle(int r) : r_(r) {}
  std::string kind() const override { return "pixel_shuffle"; }
  Shape4 output_shape(Shape4 in) const override {
    if (in.c % (r_ * r_) != 0) throw ShapeError("pixel_shuffle: channels not divisible by r^2");
    return {in.n, in.c / (r_ * r_), in.h * r_, in.w * r_};
  }
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    in_shape_ = x.shape();
    Tensor<T> y(output_shape(x.shape()));
    for_each_index(y.shape(), [&](std::size_t lo, std::size_t hi) { y[hi] = x[lo]; });
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx(in_shape_);
    for_each_index(gy.shape(), [&](std::size_t lo, std::size_t hi) { gx[lo] = gy[hi]; });
    return gx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<PixelShuffle>(*this); }

 private:
  /// Calls f(low-res flat index, high-res flat index) for every element.
  template <typename F>
  void for_each_index(Shape4 hs, F&& f) const {
    const int lh = hs.h / r_, lw = hs.w / r_, lc = hs.c * r_ * r_;
    std::size_t hi = 0;
    for (int n = 0; n < hs.n; ++n)
      for (int c = 0; c < hs.c; ++c)
        for (int y = 0; y < hs.h; ++y)
          for (int x = 0; x < hs.w; ++x, ++hi) {
            const int src_c = c * r_ * r_ + (y % r_) * r_ + (x % r_);
            const std::size_t lo = ((static_cast<std::size_t>(n) * lc + src_c) * lh + y / r_) * lw + x / r_;
            f(lo, hi);
          }
  }

  int r_;
  Shape4 in_shape_{};
};

template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  explicit MaxPool2d(int size = 2) : size_(size) {}
  std::string kind() const override { return "max_pool2d"; }
  Shape4 output_shape(Shape4 in) const override { return {in.n, in.c, in.h / size_, in.w / size_}; }
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    const Shape4 os = output_shape(x.shape());
    if (os.h <= 0 || os.w <= 0) throw ShapeError("max_pool2d: input smaller than window");
    in_shape_ = x.shape();
    Tensor<T> y(os);
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c)
        for (int oy = 0; oy < os.h; ++oy)
          for (int ox = 0; ox < os.w; ++ox, ++o) {
            T best = -std::numeric_limits<T>::infinity();
            std::size_t arg = 0;
            for (int dy = 0; dy < size_; ++dy)
              for (int dx = 0; dx < size_; ++dx) {
                const std::size_t idx =
                    ((static_cast<std::size_t>(n) * x.c() + c) * x.h() + oy * size_ + dy) * x.w() + ox * size_ + dx;
                if (x[idx] > best) {
                  best = x[idx];
                  arg = idx;
                }
              }
            y[o] = best;
            argmax_[o] = arg;
          }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx(in_shape_);
    for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax_[o]] += gy[o];
    return gx;
  }
  void clear_cache() override { argmax_.clear(); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  int size_;
  Shape4 in_shape_{};
  std::vector<std::size_t> argmax_;
};

/// Spatial mean per channel; output (n, c, 1, 1).
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  std::string kind() const override { return "global_avg_pool"; }
  Shape4 output_shape(Shape4 in) const override { return {in.n, in.c, 1, 1}; }
  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    in_shape_ = x.shape();
    Tensor<T> y(x.n(), x.c(), 1, 1);
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c) {
        const T* p = x.sample(n).data() + c * plane;
        T acc = T(0);
        for (std::size_t j = 0; j < plane; ++j) acc += p[j];
        y.at(n, c, 0, 0) = acc / static_cast<T>(plane);
      }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx(in_shape_);
    const std::size_t plane = static_cast<std::size_t>(in_shape_.h) * in_shape_.w;
    for (int n = 0; n < in_shape_.n; ++n)
      for (int c = 0; c < in_shape_.c; ++c) {
        const T g = gy.at(n, c, 0, 0) / static_cast<T>(plane);
        T* q = gx.sample(n).data() + c * plane;
        std::fill(q, q + plane, g);
      }
    return gx;
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  Shape4 in_shape_{};
};

}  // namespace chairgan::nn
