#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "chairgan/nn/layer.hpp"

namespace chairgan::nn {

/// Ordered chain of layers; deep-copyable.
template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  Sequential(const Sequential& other) : Layer<T>(other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& other) {
    if (this != &other) {
      Sequential tmp(other);
      std::swap(layers_, tmp.layers_);
      this->frozen_ = other.frozen_;
    }
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  void push(LayerPtr<T> layer) { layers_.push_back(std::move(layer)); }

  std::size_t size() const { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }
  const Layer<T>& operator[](std::size_t i) const { return *layers_[i]; }

  std::string kind() const override { return "sequential"; }

  Shape4 output_shape(Shape4 in) const override {
    for (const auto& l : layers_) in = l->output_shape(in);
    return in;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, mode);
    return h;
  }

  /// Runs only layers [first, last).
  Tensor<T> forward_range(const Tensor<T>& x, Mode mode, std::size_t first, std::size_t last) {
    Tensor<T> h = x;
    for (std::size_t i = first; i < last && i < layers_.size(); ++i) h = layers_[i]->forward(h, mode);
    return h;
  }

  Tensor<T> backward(const Tensor<T>& gy) override { return backward_range(gy, 0, layers_.size()); }

  Tensor<T> backward_range(const Tensor<T>& gy, std::size_t first, std::size_t last) {
    Tensor<T> g = gy;
    for (std::size_t i = std::min(last, layers_.size()); i-- > first;) g = layers_[i]->backward(g);
    return g;
  }

  void init(Rng& rng) override {
    for (auto& l : layers_) l->init(rng);
  }

  void collect_parameters(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_parameters(prefix + std::to_string(i) + ".", out);
  }

  void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect_buffers(prefix + std::to_string(i) + ".", out);
  }

  void clear_cache() override {
    for (auto& l : layers_) l->clear_cache();
  }

  void set_frozen(bool f) override {
    this->frozen_ = f;
    for (auto& l : layers_) l->set_frozen(f);
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sequential>(*this); }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> out;
    collect_parameters("", out);
    return out;
  }

  std::vector<ParamRef<T>> buffers() {
    std::vector<ParamRef<T>> out;
    collect_buffers("", out);
    return out;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.param->zero_grad();
  }

 private:
  std::vector<LayerPtr<T>> layers_;
};

/// y = x + body(x).
template <typename T>
class Residual final : public Layer<T> {
 public:
  explicit Residual(Sequential<T> body) : body_(std::move(body)) {}
  std::string kind() const override { return "residual"; }
  Shape4 output_shape(Shape4 in) const override { return in; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> y = body_.forward(x, mode);
    if (!(y.shape() == x.shape())) throw ShapeError("residual: body changed the shape");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx = body_.backward(gy);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    return gx;
  }

  void init(Rng& rng) override { body_.init(rng); }
  void collect_parameters(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    body_.collect_parameters(prefix + "body.", out);
  }
  void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    body_.collect_buffers(prefix + "body.", out);
  }
  void clear_cache() override { body_.clear_cache(); }
  void set_frozen(bool f) override {
    this->frozen_ = f;
    body_.set_frozen(f);
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  Sequential<T> body_;
};

}  // namespace chairgan::nn
