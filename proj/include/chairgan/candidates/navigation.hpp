#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/synthesis/latent.hpp"

namespace chairgan::candidates {

using synthesis::LatentVector;

enum class InterpMode { Linear, Spherical };

inline InterpMode parse_interp_mode(const std::string& s) {
  if (s == "linear" || s.empty()) return InterpMode::Linear;
  if (s == "spherical" || s == "slerp") return InterpMode::Spherical;
  throw InvalidArgument("unknown interpolation mode " + s);
}

inline LatentVector clamp_to_cube(LatentVector z, double lo = -1.0, double hi = 1.0) {
  for (auto& v : z.values) v = std::clamp(v, lo, hi);
  return z;
}

/// Interpolation path without clamping. Endpoints are copied, not computed.
/// Spherical mode falls back to linear when either vector is zero or the
/// two are (anti)parallel, where the great circle is undefined.
inline std::vector<LatentVector> interpolate_unclamped(const LatentVector& a, const LatentVector& b, int steps,
                                                       InterpMode mode) {
  if (steps < 2) throw InvalidArgument("interpolate: steps must be >= 2");
  if (a.dim() != b.dim()) throw ShapeError("interpolate: latent dimensions differ");
  const std::size_t d = a.dim();
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  double omega = 0.0;
  bool spherical = mode == InterpMode::Spherical && na > 0.0 && nb > 0.0;
  if (spherical) {
    omega = std::acos(std::clamp(dot / (na * nb), -1.0, 1.0));
    spherical = std::sin(omega) > 1e-9;
  }

  std::vector<LatentVector> out;
  out.reserve(static_cast<std::size_t>(steps));
  out.push_back(a);
  for (int i = 1; i + 1 < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    double wa = 1.0 - t, wb = t;
    if (spherical) {
      wa = std::sin((1.0 - t) * omega) / std::sin(omega);
      wb = std::sin(t * omega) / std::sin(omega);
    }
    LatentVector z;
    z.values.resize(d);
    for (std::size_t k = 0; k < d; ++k) z[k] = wa * a[k] + wb * b[k];
    out.push_back(std::move(z));
  }
  out.push_back(b);
  return out;
}

/// `steps` latents from a to b (inclusive), clamped to the latent cube.
inline std::vector<LatentVector> interpolate_latents(const LatentVector& a, const LatentVector& b, int steps,
                                                     InterpMode mode = InterpMode::Linear) {
  auto path = interpolate_unclamped(a, b, steps, mode);
  for (std::size_t i = 1; i + 1 < path.size(); ++i) path[i] = clamp_to_cube(std::move(path[i]));
  return path;
}

/// n latents: center plus an independent uniform offset in [-radius, radius]
/// per component, clamped to the cube.
inline std::vector<LatentVector> neighborhood_samples(const LatentVector& center, double radius, std::size_t n,
                                                      std::uint64_t seed) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("neighborhood: radius must be > 0");
  if (n < 1) throw InvalidArgument("neighborhood: n must be >= 1");
  Rng rng(seed);
  std::vector<LatentVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LatentVector z = center;
    for (auto& v : z.values) v += rng.uniform(-radius, radius);
    out.push_back(clamp_to_cube(std::move(z)));
  }
  return out;
}

}  // namespace chairgan::candidates
