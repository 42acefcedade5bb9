#pragma once

#include <cstdint>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/core/tensor.hpp"

namespace chairgan::synthesis {

inline constexpr int kLatentDim = 100;

/// A point in the latent cube.
struct LatentVector {
  std::vector<double> values;

  LatentVector() = default;
  explicit LatentVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t dim() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  bool in_cube(double lo = -1.0, double hi = 1.0) const {
    for (double v : values)
      if (!(v >= lo && v <= hi)) return false;
    return true;
  }

  friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

inline LatentVector draw_latent(Rng& rng, int dim, double lo = -1.0, double hi = 1.0) {
  LatentVector z;
  z.values.resize(static_cast<std::size_t>(dim));
  for (auto& v : z.values) v = rng.uniform(lo, hi);
  return z;
}

/// n i.i.d. uniform latents; a pure function of (n, seed).
inline std::vector<LatentVector> sample_latent(std::size_t n, std::uint64_t seed, int dim = kLatentDim,
                                               double lo = -1.0, double hi = 1.0) {
  if (n < 1) throw InvalidArgument("sample_latent: n must be >= 1");
  Rng rng(seed);
  std::vector<LatentVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_latent(rng, dim, lo, hi));
  return out;
}

template <typename T>
Tensor<T> latents_to_tensor(const std::vector<LatentVector>& zs, int dim) {
  if (zs.empty()) throw ShapeError("latent batch is empty");
  Tensor<T> t(static_cast<int>(zs.size()), dim, 1, 1);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    if (zs[i].dim() != static_cast<std::size_t>(dim))
      throw ShapeError("latent dimension " + std::to_string(zs[i].dim()) + " != " + std::to_string(dim));
    for (int k = 0; k < dim; ++k) t.at(static_cast<int>(i), k, 0, 0) = static_cast<T>(zs[i].values[static_cast<std::size_t>(k)]);
  }
  return t;
}

}  // namespace chairgan::synthesis
