#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "chairgan/core/error.hpp"

namespace chairgan {

/// Storage for anything Eigen maps. Eigen peels unaligned heads based on the
/// runtime address, which changes summation order, so buffers get a fixed
/// alignment to keep results bit-identical from one allocation to the next.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

struct Shape4 {
  int n = 0, c = 0, h = 0, w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t sample_size() const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  friend bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
  }
};

/// Dense NCHW tensor.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(int n, int c, int h, int w, T fill = T(0)) : Tensor(Shape4{n, c, h, w}, fill) {}

  const Shape4& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  AlignedVector<T>& values() { return data_; }
  const AlignedVector<T>& values() const { return data_; }

  std::span<T> sample(int i) {
    return std::span<T>(data_.data() + static_cast<std::size_t>(i) * shape_.sample_size(), shape_.sample_size());
  }
  std::span<const T> sample(int i) const {
    return std::span<const T>(data_.data() + static_cast<std::size_t>(i) * shape_.sample_size(),
                              shape_.sample_size());
  }

  T& at(int ni, int ci, int hi, int wi) {
    return data_[((static_cast<std::size_t>(ni) * shape_.c + ci) * shape_.h + hi) * shape_.w + wi];
  }
  const T& at(int ni, int ci, int hi, int wi) const {
    return data_[((static_cast<std::size_t>(ni) * shape_.c + ci) * shape_.h + hi) * shape_.w + wi];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape4 s) const {
    if (s.size() != data_.size()) throw ShapeError("reshape " + shape_.str() + " -> " + s.str());
    Tensor t = *this;
    t.shape_ = s;
    return t;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape4 shape_{};
  AlignedVector<T> data_;
};

/// Rows [first, first+count) of the batch dimension.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, int first, int count) {
  if (first < 0 || count < 0 || first + count > t.n()) throw ShapeError("slice_batch out of range");
  Tensor<T> out(count, t.c(), t.h(), t.w());
  const std::size_t ss = t.shape().sample_size();
  std::copy_n(t.data() + static_cast<std::size_t>(first) * ss, static_cast<std::size_t>(count) * ss, out.data());
  return out;
}

template <typename T>
Tensor<T> concat_batch(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) return {};
  Shape4 s = parts.front().shape();
  s.n = 0;
  for (const auto& p : parts) {
    if (p.c() != s.c || p.h() != s.h || p.w() != s.w) throw ShapeError("concat_batch: mismatched samples");
    s.n += p.n();
  }
  Tensor<T> out(s);
  T* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
  return out;
}

}  // namespace chairgan
