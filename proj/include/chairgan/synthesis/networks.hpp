#pragma once

#include <vector>

#include "chairgan/core/image.hpp"
#include "chairgan/nn/conv.hpp"
#include "chairgan/nn/layers.hpp"
#include "chairgan/nn/sequential.hpp"
#include "chairgan/synthesis/config.hpp"
#include "chairgan/synthesis/latent.hpp"

namespace chairgan::synthesis {

template <typename T>
class Generator {
 public:
  explicit Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int c0 = cfg_.channels_at(0), r0 = cfg_.base_resolution;
    net_.template add<nn::Dense<T>>(cfg_.latent_dim, c0 * r0 * r0);
    net_.template add<nn::Reshape<T>>(c0, r0, r0);
    if (cfg_.batch_norm) net_.template add<nn::BatchNorm2d<T>>(c0);
    net_.template add<nn::Relu<T>>();
    for (int s = 1; s < cfg_.stages; ++s) {
      net_.template add<nn::ConvTranspose2d<T>>(cfg_.channels_at(s - 1), cfg_.channels_at(s), 4, 2, 1, !cfg_.batch_norm);
      if (cfg_.batch_norm) net_.template add<nn::BatchNorm2d<T>>(cfg_.channels_at(s));
      net_.template add<nn::Relu<T>>();
    }
    net_.template add<nn::ConvTranspose2d<T>>(cfg_.channels_at(cfg_.stages - 1), cfg_.image_channels, 4, 2, 1, true);
    net_.template add<nn::Tanh<T>>();
  }

  const GeneratorConfig& config() const { return cfg_; }
  nn::Sequential<T>& net() { return net_; }
  const nn::Sequential<T>& net() const { return net_; }

  void init(Rng& rng) { net_.init(rng); }

  /// z has shape (n, latent_dim, 1, 1); output (n, channels, R, R) in [-1, 1].
  Tensor<T> forward(const Tensor<T>& z, nn::Mode mode) {
    if (z.c() != cfg_.latent_dim || z.h() != 1 || z.w() != 1)
      throw ShapeError("generator: expected latent batch (n," + std::to_string(cfg_.latent_dim) + ",1,1), got " +
                       z.shape().str());
    return net_.forward(z, mode);
  }

  Tensor<T> backward(const Tensor<T>& grad) { return net_.backward(grad); }

 private:
  GeneratorConfig cfg_;
  nn::Sequential<T> net_;
};

/// Discriminator producing logits; probabilities are sigmoid(logit).
template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, int resolution, int image_channels = 3)
      : cfg_(cfg), resolution_(resolution), channels_(image_channels) {
    cfg_.validate();
    if (resolution % (1 << cfg_.stages) != 0) throw ConfigError("discriminator: resolution not divisible by 2^stages");
    const int r_end = resolution >> cfg_.stages;
    const nn::LeakyReluFn leak{cfg_.leak_slope};
    net_.template add<nn::Conv2d<T>>(image_channels, cfg_.channels_at(0), 4, 2, 1, true);
    net_.template add<nn::LeakyRelu<T>>(leak);
    for (int s = 1; s < cfg_.stages; ++s) {
      net_.template add<nn::Conv2d<T>>(cfg_.channels_at(s - 1), cfg_.channels_at(s), 4, 2, 1, !cfg_.batch_norm);
      if (cfg_.batch_norm) net_.template add<nn::BatchNorm2d<T>>(cfg_.channels_at(s));
      net_.template add<nn::LeakyRelu<T>>(leak);
    }
    net_.template add<nn::Dense<T>>(cfg_.channels_at(cfg_.stages - 1) * r_end * r_end, 1);
  }

  const DiscriminatorConfig& config() const { return cfg_; }
  int resolution() const { return resolution_; }
  nn::Sequential<T>& net() { return net_; }
  const nn::Sequential<T>& net() const { return net_; }

  void init(Rng& rng) { net_.init(rng); }

  std::vector<T> logits(const Tensor<T>& images, nn::Mode mode) {
    if (images.c() != channels_ || images.h() != resolution_ || images.w() != resolution_)
      throw ShapeError("discriminator: expected (n," + std::to_string(channels_) + "," + std::to_string(resolution_) +
                       "," + std::to_string(resolution_) + "), got " + images.shape().str());
    if (images.n() < 1) throw ShapeError("discriminator: empty batch");
    const Tensor<T> out = net_.forward(images, mode);
    return std::vector<T>(out.values().begin(), out.values().end());
  }

  /// Probabilities strictly inside (0, 1) for finite logits.
  std::vector<T> forward(const Tensor<T>& images, nn::Mode mode) {
    auto l = logits(images, mode);
    const nn::SigmoidFn sig;
    for (auto& v : l) v = sig.value(v);
    return l;
  }

  /// Back-propagates dLoss/dlogit to the images.
  Tensor<T> backward(const std::vector<T>& grad_logits) {
    Tensor<T> g(static_cast<int>(grad_logits.size()), 1, 1, 1);
    std::copy(grad_logits.begin(), grad_logits.end(), g.data());
    return net_.backward(g);
  }

 private:
  DiscriminatorConfig cfg_;
  int resolution_;
  int channels_;
  nn::Sequential<T> net_;
};

/// Inference-mode generation. Each sample is computed independently, so
/// results do not depend on how latents are batched.
template <typename T>
std::vector<NormalizedImage> generate(Generator<T>& gen, const std::vector<LatentVector>& zs) {
  const auto out = gen.forward(latents_to_tensor<T>(zs, gen.config().latent_dim), nn::Mode::Inference);
  return unstack_images(out);
}

template <typename T>
std::vector<T> discriminate(Discriminator<T>& disc, const std::vector<NormalizedImage>& images) {
  return disc.forward(stack_images<T>(images), nn::Mode::Inference);
}

}  // namespace chairgan::synthesis
