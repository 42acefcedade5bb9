#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/synthesis/config.hpp"

namespace chairgan::synthesis {

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kLogClamp = 1e-7;

inline double clamp_probability(double p) { return std::clamp(p, kLogClamp, 1.0 - kLogClamp); }

struct AdversarialLosses {
  double loss_d = 0.0;
  double loss_g = 0.0;
};

template <typename P>
double mean_log(std::span<const P> ps, bool complement) {
  double acc = 0.0;
  for (P p : ps) {
    const double c = clamp_probability(static_cast<double>(p));
    acc += std::log(complement ? 1.0 - c : c);
  }
  return acc / static_cast<double>(ps.size());
}

/// loss_d = -mean log D(x) - mean log(1 - D(G(z)));
/// loss_g = -mean log D(G(z)) (non-saturating) or mean log(1 - D(G(z))).
template <typename P>
AdversarialLosses adversarial_losses(std::span<const P> d_real, std::span<const P> d_fake,
                                     GeneratorLoss mode = GeneratorLoss::NonSaturating) {
  if (d_real.empty() || d_fake.empty()) throw InvalidArgument("adversarial_losses: empty batch");
  AdversarialLosses out;
  out.loss_d = -mean_log(d_real, false) - mean_log(d_fake, true);
  out.loss_g = mode == GeneratorLoss::NonSaturating ? -mean_log(d_fake, false) : mean_log(d_fake, true);
  return out;
}

template <typename P>
AdversarialLosses adversarial_losses(const std::vector<P>& d_real, const std::vector<P>& d_fake,
                                     GeneratorLoss mode = GeneratorLoss::NonSaturating) {
  return adversarial_losses(std::span<const P>(d_real), std::span<const P>(d_fake), mode);
}

// Gradients below are taken w.r.t. the discriminator logit l, with p =
// sigmoid(l). They are the exact derivatives of the unclamped losses, so they
// stay informative when a probability saturates in floating point.

/// d/dl of -mean log p over a batch of size n.
template <typename T>
std::vector<T> grad_neg_log_p(std::span<const T> p) {
  std::vector<T> g(p.size());
  const T inv_n = T(1) / static_cast<T>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = -(T(1) - p[i]) * inv_n;
  return g;
}

/// d/dl of -mean log(1 - p).
template <typename T>
std::vector<T> grad_neg_log_one_minus_p(std::span<const T> p) {
  std::vector<T> g(p.size());
  const T inv_n = T(1) / static_cast<T>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * inv_n;
  return g;
}

/// Generator loss gradient w.r.t. fake logits.
template <typename T>
std::vector<T> generator_loss_grad(std::span<const T> d_fake, GeneratorLoss mode) {
  if (mode == GeneratorLoss::NonSaturating) return grad_neg_log_p(d_fake);
  auto g = grad_neg_log_one_minus_p(d_fake);
  for (auto& v : g) v = -v;
  return g;
}

}  // namespace chairgan::synthesis
