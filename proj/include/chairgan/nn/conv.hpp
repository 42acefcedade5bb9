#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/nn/layer.hpp"

namespace chairgan::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Geometry of a sliding window over one sample.
struct Window {
  int channels, height, width;  // image being sampled
  int kernel, stride, pad;
  int out_height, out_width;

  static Window make(int c, int h, int w, int k, int s, int p) {
    const int oh = (h + 2 * p - k) / s + 1;
    const int ow = (w + 2 * p - k) / s + 1;
    if (oh <= 0 || ow <= 0) throw ShapeError("convolution window larger than padded input");
    return {c, h, w, k, s, p, oh, ow};
  }
  int rows() const { return channels * kernel * kernel; }
  int cols() const { return out_height * out_width; }
};

/// Unfolds image patches into a (C*k*k) x (OH*OW) matrix.
template <typename T>
void im2col(const T* img, const Window& g, T* col) {
  const int cols = g.cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kernel; ++ki)
      for (int kj = 0; kj < g.kernel; ++kj) {
        T* row = col + static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj) * cols;
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int y = oy * g.stride - g.pad + ki;
          T* dst = row + oy * g.out_width;
          if (y < 0 || y >= g.height) {
            std::fill(dst, dst + g.out_width, T(0));
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * g.height + y) * g.width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int x = ox * g.stride - g.pad + kj;
            dst[ox] = (x >= 0 && x < g.width) ? src[x] : T(0);
          }
        }
      }
}

/// Adjoint of im2col: scatters (and sums) patch columns back into the image.
template <typename T>
void col2im(const T* col, const Window& g, T* img) {
  std::fill(img, img + static_cast<std::size_t>(g.channels) * g.height * g.width, T(0));
  const int cols = g.cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kernel; ++ki)
      for (int kj = 0; kj < g.kernel; ++kj) {
        const T* row = col + static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj) * cols;
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int y = oy * g.stride - g.pad + ki;
          if (y < 0 || y >= g.height) continue;
          T* dst = img + (static_cast<std::size_t>(c) * g.height + y) * g.width;
          const T* src = row + oy * g.out_width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int x = ox * g.stride - g.pad + kj;
            if (x >= 0 && x < g.width) dst[x] += src[ox];
          }
        }
      }
}

/// Weight initialisation: normal with the given stddev, or He-normal when
/// stddev <= 0.
inline double init_stddev(double requested, int fan_in) {
  return requested > 0.0 ? requested : std::sqrt(2.0 / fan_in);
}

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias = true,
         double init_std = 0.02)
      : in_(in_channels), out_(out_channels), k_(kernel), s_(stride), p_(pad), has_bias_(bias),
        init_std_(init_std), weight_(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
        bias_(bias ? static_cast<std::size_t>(out_channels) : 0) {}

  std::string kind() const override { return "conv2d"; }

  Shape4 output_shape(Shape4 in) const override {
    const auto g = Window::make(in.c, in.h, in.w, k_, s_, p_);
    return {in.n, out_, g.out_height, g.out_width};
  }

  void init(Rng& rng) override {
    const double sd = init_stddev(init_std_, in_ * k_ * k_);
    for (auto& w : weight_.value) w = static_cast<T>(rng.normal(0.0, sd));
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (x.c() != in_) throw ShapeError("conv2d: expected " + std::to_string(in_) + " input channels, got " + x.shape().str());
    geom_ = Window::make(in_, x.h(), x.w(), k_, s_, p_);
    Tensor<T> y(x.n(), out_, geom_.out_height, geom_.out_width);
    const int K = geom_.rows(), P = geom_.cols();
    const bool keep = mode == Mode::Train;
    batch_ = x.n();
    cols_.assign(keep ? static_cast<std::size_t>(x.n()) * K * P : static_cast<std::size_t>(K) * P, T(0));
    ConstMatrixMap<T> W(weight_.value.data(), out_, K);
    for (int i = 0; i < x.n(); ++i) {
      T* col = cols_.data() + (keep ? static_cast<std::size_t>(i) * K * P : 0);
      im2col(x.sample(i).data(), geom_, col);
      MatrixMap<T> Y(y.sample(i).data(), out_, P);
      Y.noalias() = W * ConstMatrixMap<T>(col, K, P);
      if (has_bias_)
        for (int o = 0; o < out_; ++o) Y.row(o).array() += bias_.value[static_cast<std::size_t>(o)];
    }
    cached_ = keep;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (!cached_) throw Error("conv2d: backward without a training-mode forward");
    const int K = geom_.rows(), P = geom_.cols();
    Tensor<T> gx(batch_, in_, geom_.height, geom_.width);
    ConstMatrixMap<T> W(weight_.value.data(), out_, K);
    MatrixMap<T> dW(weight_.grad.data(), out_, K);
    RowMatrix<T> dcol(K, P);
    for (int i = 0; i < batch_; ++i) {
      ConstMatrixMap<T> G(gy.sample(i).data(), out_, P);
      ConstMatrixMap<T> col(cols_.data() + static_cast<std::size_t>(i) * K * P, K, P);
      if (!this->frozen_) {
        dW.noalias() += G * col.transpose();
        if (has_bias_)
          for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += G.row(o).sum();
      }
      dcol.noalias() = W.transpose() * G;
      col2im(dcol.data(), geom_, gx.sample(i).data());
    }
    return gx;
  }

  void collect_parameters(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "weight", &weight_});
    if (has_bias_) out.push_back({prefix + "bias", &bias_});
  }

  void clear_cache() override {
    cols_.clear();
    cols_.shrink_to_fit();
    cached_ = false;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  int in_, out_, k_, s_, p_;
  bool has_bias_;
  double init_std_;
  Param<T> weight_, bias_;
  Window geom_{};
  int batch_ = 0;
  bool cached_ = false;
  AlignedVector<T> cols_;
};

/// Fractional-strided (transposed) convolution; weight layout (in, out, k, k).
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias = true,
                  double init_std = 0.02)
      : in_(in_channels), out_(out_channels), k_(kernel), s_(stride), p_(pad), has_bias_(bias),
        init_std_(init_std), weight_(static_cast<std::size_t>(in_channels) * out_channels * kernel * kernel),
        bias_(bias ? static_cast<std::size_t>(out_channels) : 0) {}

  std::string kind() const override { return "conv_transpose2d"; }

  Shape4 output_shape(Shape4 in) const override {
    return {in.n, out_, (in.h - 1) * s_ - 2 * p_ + k_, (in.w - 1) * s_ - 2 * p_ + k_};
  }

  void init(Rng& rng) override {
    const double sd = init_stddev(init_std_, in_ * k_ * k_);
    for (auto& w : weight_.value) w = static_cast<T>(rng.normal(0.0, sd));
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (x.c() != in_) throw ShapeError("conv_transpose2d: expected " + std::to_string(in_) + " input channels, got " + x.shape().str());
    const Shape4 os = output_shape(x.shape());
    geom_ = Window::make(out_, os.h, os.w, k_, s_, p_);
    if (geom_.out_height != x.h() || geom_.out_width != x.w()) throw ShapeError("conv_transpose2d: inconsistent geometry");
    const int K = geom_.rows(), P = geom_.cols();
    Tensor<T> y(os);
    ConstMatrixMap<T> W(weight_.value.data(), in_, K);
    RowMatrix<T> col(K, P);
    for (int i = 0; i < x.n(); ++i) {
      col.noalias() = W.transpose() * ConstMatrixMap<T>(x.sample(i).data(), in_, P);
      col2im(col.data(), geom_, y.sample(i).data());
      if (has_bias_) {
        T* dst = y.sample(i).data();
        const std::size_t plane = static_cast<std::size_t>(os.h) * os.w;
        for (int o = 0; o < out_; ++o)
          for (std::size_t j = 0; j < plane; ++j) dst[o * plane + j] += bias_.value[static_cast<std::size_t>(o)];
      }
    }
    if (mode == Mode::Train) {
      input_ = x;
      cached_ = true;
    } else {
      cached_ = false;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (!cached_) throw Error("conv_transpose2d: backward without a training-mode forward");
    const int K = geom_.rows(), P = geom_.cols();
    Tensor<T> gx(input_.shape());
    ConstMatrixMap<T> W(weight_.value.data(), in_, K);
    MatrixMap<T> dW(weight_.grad.data(), in_, K);
    RowMatrix<T> gcol(K, P);
    const std::size_t plane = static_cast<std::size_t>(geom_.height) * geom_.width;
    for (int i = 0; i < input_.n(); ++i) {
      im2col(gy.sample(i).data(), geom_, gcol.data());
      MatrixMap<T>(gx.sample(i).data(), in_, P).noalias() = W * gcol;
      if (!this->frozen_) {
        dW.noalias() += ConstMatrixMap<T>(input_.sample(i).data(), in_, P) * gcol.transpose();
        if (has_bias_) {
          const T* g = gy.sample(i).data();
          for (int o = 0; o < out_; ++o) {
            T acc = T(0);
            for (std::size_t j = 0; j < plane; ++j) acc += g[o * plane + j];
            bias_.grad[static_cast<std::size_t>(o)] += acc;
          }
        }
      }
    }
    return gx;
  }

  void collect_parameters(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "weight", &weight_});
    if (has_bias_) out.push_back({prefix + "bias", &bias_});
  }

  void clear_cache() override {
    input_ = Tensor<T>();
    cached_ = false;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

 private:
  int in_, out_, k_, s_, p_;
  bool has_bias_;
  double init_std_;
  Param<T> weight_, bias_;
  Window geom_{};
  bool cached_ = false;
  Tensor<T> input_;
};

/// Fully connected layer over the flattened sample; output shape (n, out, 1, 1).
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int out_features, double init_std = 0.02)
      : in_(in_features), out_(out_features), init_std_(init_std),
        weight_(static_cast<std::size_t>(in_features) * out_features), bias_(static_cast<std::size_t>(out_features)) {}

  std::string kind() const override { return "dense"; }
  Shape4 output_shape(Shape4 in) const override { return {in.n, out_, 1, 1}; }

  void init(Rng& rng) override {
    const double sd = init_stddev(init_std_, in_);
    for (auto& w : weight_.value) w = static_cast<T>(rng.normal(0.0, sd));
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    if (x.shape().sample_size() != static_cast<std::size_t>(in_))
      throw ShapeError("dense: expected " + std::to_string(in_) + " features, got " + x.shape().str());
    Tensor<T> y(x.n(), out_, 1, 1);
    ConstMatrixMap<T> W(weight_.value.data(), out_, in_);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias_.value.data(), out_);
    for (int i = 0; i < x.n(); ++i) {
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> yi(y.sample(i).data(), out_);
      yi.noalias() = W * Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(x.sample(i).data(), in_);
      yi += b;
    }
    if (mode == Mode::Train) {
      input_ = x;
      cached_ = true;
    } else {
      cached_ = false;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (!cached_) throw Error("dense: backward without a training-mode forward");
    const int n = input_.n();
    ConstMatrixMap<T> X(input_.data(), n, in_);
    ConstMatrixMap<T> G(gy.data(), n, out_);
    if (!this->frozen_) {
      MatrixMap<T>(weight_.grad.data(), out_, in_).noalias() += G.transpose() * X;
      for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += G.col(o).sum();
    }
    Tensor<T> gx(input_.shape());
    MatrixMap<T>(gx.data(), n, in_).noalias() = G * ConstMatrixMap<T>(weight_.value.data(), out_, in_);
    return gx;
  }

  void collect_parameters(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "weight", &weight_});
    out.push_back({prefix + "bias", &bias_});
  }

  void clear_cache() override {
    input_ = Tensor<T>();
    cached_ = false;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  int in_, out_;
  double init_std_;
  Param<T> weight_, bias_;
  bool cached_ = false;
  Tensor<T> input_;
};

}  // namespace chairgan::nn
