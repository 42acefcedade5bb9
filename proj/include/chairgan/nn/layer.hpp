#pragma once

#include <memory>
#include <string>
#include <vector>

#include "chairgan/core/rng.hpp"
#include "chairgan/core/tensor.hpp"

namespace chairgan::nn {

enum class Mode { Train, Inference };

/// A learnable (or buffered) array together with its gradient accumulator.
template <typename T>
struct Param {
  AlignedVector<T> value;
  AlignedVector<T> grad;

  explicit Param(std::size_t n = 0) : value(n, T(0)), grad(n, T(0)) {}
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
struct ParamRef {
  std::string name;
  Param<T>* param;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape4 output_shape(Shape4 in) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  /// Gradient w.r.t. the input of the last forward call. Accumulates
  /// parameter gradients unless the layer is frozen.
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual void init(Rng&) {}
  virtual void collect_parameters(const std::string&, std::vector<ParamRef<T>>&) {}
  /// Non-trainable state that must be checkpointed (running statistics).
  virtual void collect_buffers(const std::string&, std::vector<ParamRef<T>>&) {}
  /// Drops activations cached for backward.
  virtual void clear_cache() {}

  virtual void set_frozen(bool f) { frozen_ = f; }
  bool frozen() const { return frozen_; }

 protected:
  bool frozen_ = false;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

}  // namespace chairgan::nn
