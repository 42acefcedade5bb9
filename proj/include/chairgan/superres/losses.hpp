#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/core/tensor.hpp"
#include "chairgan/synthesis/losses.hpp"

namespace chairgan::superres {

/// One feature response phi_{i,j}(y): channels x height x width.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

/// Squared feature difference summed over channels and positions, divided by
/// the spatial size W*H only.
inline double perceptual_content_loss(const FeatureMap& phi_hr, const FeatureMap& phi_sr) {
  if (phi_hr.channels != phi_sr.channels || phi_hr.height != phi_sr.height || phi_hr.width != phi_sr.width)
    throw ShapeError("perceptual_content_loss: feature map shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < phi_hr.data.size(); ++i) {
    const double d = phi_hr.data[i] - phi_sr.data[i];
    acc += d * d;
  }
  return acc / (static_cast<double>(phi_hr.width) * phi_hr.height);
}

/// Batch version: mean over samples of the per-sample loss.
template <typename T>
double perceptual_content_loss(const Tensor<T>& phi_hr, const Tensor<T>& phi_sr) {
  if (!(phi_hr.shape() == phi_sr.shape())) throw ShapeError("perceptual_content_loss: batch shapes differ");
  if (phi_hr.n() < 1) throw ShapeError("perceptual_content_loss: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < phi_hr.size(); ++i) {
    const double d = static_cast<double>(phi_hr[i]) - static_cast<double>(phi_sr[i]);
    acc += d * d;
  }
  return acc / (static_cast<double>(phi_hr.w()) * phi_hr.h() * phi_hr.n());
}

/// Gradient of the batch loss w.r.t. phi_sr.
template <typename T>
Tensor<T> perceptual_content_grad(const Tensor<T>& phi_hr, const Tensor<T>& phi_sr) {
  if (!(phi_hr.shape() == phi_sr.shape())) throw ShapeError("perceptual_content_grad: batch shapes differ");
  Tensor<T> g(phi_sr.shape());
  const T scale = static_cast<T>(2.0 / (static_cast<double>(phi_hr.w()) * phi_hr.h() * phi_hr.n()));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (phi_sr[i] - phi_hr[i]);
  return g;
}

template <typename T>
FeatureMap feature_map(const Tensor<T>& batch, int index) {
  FeatureMap m(batch.c(), batch.h(), batch.w());
  const auto s = batch.sample(index);
  for (std::size_t i = 0; i < s.size(); ++i) m.data[i] = static_cast<double>(s[i]);
  return m;
}

struct SRLosses {
  double loss_d_sr = 0.0;
  double loss_g_sr = 0.0;
};

/// loss_d = -mean log D(y_hr) - mean log(1 - D(G(y_lr)));
/// loss_g = content + weight * (-mean log D(G(y_lr))).
template <typename P>
SRLosses sr_losses(std::span<const P> d_hr, std::span<const P> d_sr, double content, double weight) {
  if (d_hr.empty() || d_sr.empty()) throw InvalidArgument("sr_losses: empty batch");
  SRLosses out;
  out.loss_d_sr = -synthesis::mean_log(d_hr, false) - synthesis::mean_log(d_sr, true);
  out.loss_g_sr = content + weight * (-synthesis::mean_log(d_sr, false));
  return out;
}

template <typename P>
SRLosses sr_losses(const std::vector<P>& d_hr, const std::vector<P>& d_sr, double content, double weight) {
  return sr_losses(std::span<const P>(d_hr), std::span<const P>(d_sr), content, weight);
}

}  // namespace chairgan::superres
