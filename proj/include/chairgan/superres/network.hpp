#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/core/image.hpp"
#include "chairgan/nn/conv.hpp"
#include "chairgan/nn/layers.hpp"
#include "chairgan/nn/sequential.hpp"

namespace chairgan::superres {

inline constexpr int kScaleFactor = 4;

/// Residual trunk at low resolution followed by two x2 sub-pixel upsampling
/// stages. The network predicts a correction to the nearest-neighbour x4
/// upsample of its input; the sum is clamped to [-1, 1]. No batch
/// normalization, so inference equals training behaviour.
struct SRGeneratorConfig {
  int channels = 16;
  int residual_blocks = 2;

  void validate() const {
    if (channels < 1) throw ConfigError("sr generator: channels must be >= 1");
    if (residual_blocks < 0) throw ConfigError("sr generator: residual_blocks must be >= 0");
  }
};

/// Strided 3x3 convolutions with batch norm and leaky ReLU, global average
/// pooling and a linear read-out; accepts any input size >= 2^stages.
struct SRDiscriminatorConfig {
  int base_channels = 8;
  int stages = 3;
  double leak_slope = 0.2;

  void validate() const {
    if (base_channels < 1 || stages < 1) throw ConfigError("sr discriminator: invalid size");
    if (!(leak_slope > 0.0 && leak_slope < 1.0)) throw ConfigError("sr discriminator: leak_slope must be in (0, 1)");
  }
};

inline void to_json(nlohmann::json& j, const SRGeneratorConfig& c) {
  j = {{"channels", c.channels}, {"residual_blocks", c.residual_blocks}};
}
inline void from_json(const nlohmann::json& j, SRGeneratorConfig& c) {
  c.channels = j.value("channels", c.channels);
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
}
inline void to_json(nlohmann::json& j, const SRDiscriminatorConfig& c) {
  j = {{"base_channels", c.base_channels}, {"stages", c.stages}, {"leak_slope", c.leak_slope}};
}
inline void from_json(const nlohmann::json& j, SRDiscriminatorConfig& c) {
  c.base_channels = j.value("base_channels", c.base_channels);
  c.stages = j.value("stages", c.stages);
  c.leak_slope = j.value("leak_slope", c.leak_slope);
}

template <typename T>
class SRGenerator {
 public:
  explicit SRGenerator(const SRGeneratorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int c = cfg_.channels;
    net_.template add<nn::Conv2d<T>>(3, c, 3, 1, 1, true, -1.0);
    net_.template add<nn::Relu<T>>();
    nn::Sequential<T> trunk;
    for (int b = 0; b < cfg_.residual_blocks; ++b) {
      nn::Sequential<T> body;
      body.template add<nn::Conv2d<T>>(c, c, 3, 1, 1, true, -1.0);
      body.template add<nn::Relu<T>>();
      body.template add<nn::Conv2d<T>>(c, c, 3, 1, 1, true, 0.01);
      trunk.template add<nn::Residual<T>>(std::move(body));
    }
    trunk.template add<nn::Conv2d<T>>(c, c, 3, 1, 1, true, 0.01);
    net_.template add<nn::Residual<T>>(std::move(trunk));
    for (int u = 0; u < 2; ++u) {
      net_.template add<nn::Conv2d<T>>(c, 4 * c, 3, 1, 1, true, -1.0);
      net_.template add<nn::PixelShuffle<T>>(2);
      net_.template add<nn::Relu<T>>();
    }
    net_.template add<nn::Conv2d<T>>(c, 3, 3, 1, 1, true, 1e-3);
  }

  const SRGeneratorConfig& config() const { return cfg_; }
  nn::Sequential<T>& net() { return net_; }
  void init(Rng& rng) { net_.init(rng); }

  Tensor<T> forward(const Tensor<T>& lr, nn::Mode mode) {
    if (lr.c() != 3 || lr.h() < 1 || lr.w() < 1) throw ShapeError("sr generator: expected RGB input, got " + lr.shape().str());
    Tensor<T> y = net_.forward(lr, mode);
    const int r = kScaleFactor;
    if (mode == nn::Mode::Train) inside_.assign(y.size(), 1);
    std::size_t i = 0;
    for (int n = 0; n < y.n(); ++n)
      for (int c = 0; c < 3; ++c)
        for (int yy = 0; yy < y.h(); ++yy)
          for (int x = 0; x < y.w(); ++x, ++i) {
            const T v = y[i] + lr.at(n, c, yy / r, x / r);
            if (v > T(1) || v < T(-1)) {
              y[i] = v > T(1) ? T(1) : T(-1);
              if (mode == nn::Mode::Train) inside_[i] = 0;
            } else {
              y[i] = v;
            }
          }
    return y;
  }

  /// Gradient w.r.t. the low-resolution input of the last train-mode forward.
  Tensor<T> backward(const Tensor<T>& g) {
    if (inside_.size() != g.size()) throw Error("sr generator: backward without matching train-mode forward");
    Tensor<T> gm = g;
    for (std::size_t i = 0; i < gm.size(); ++i)
      if (!inside_[i]) gm[i] = T(0);
    Tensor<T> gx = net_.backward(gm);
    const int r = kScaleFactor;
    std::size_t i = 0;
    for (int n = 0; n < gm.n(); ++n)
      for (int c = 0; c < 3; ++c)
        for (int yy = 0; yy < gm.h(); ++yy)
          for (int x = 0; x < gm.w(); ++x, ++i) gx.at(n, c, yy / r, x / r) += gm[i];
    return gx;
  }

  void clear_cache() {
    net_.clear_cache();
    inside_.clear();
  }

 private:
  SRGeneratorConfig cfg_;
  nn::Sequential<T> net_;
  std::vector<unsigned char> inside_;
};

template <typename T>
class SRDiscriminator {
 public:
  explicit SRDiscriminator(const SRDiscriminatorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const nn::LeakyReluFn leak{cfg_.leak_slope};
    net_.template add<nn::Conv2d<T>>(3, cfg_.base_channels, 3, 1, 1, true);
    net_.template add<nn::LeakyRelu<T>>(leak);
    int in = cfg_.base_channels;
    for (int s = 0; s < cfg_.stages; ++s) {
      const int out = cfg_.base_channels << s;
      net_.template add<nn::Conv2d<T>>(in, out, 4, 2, 1, false);
      net_.template add<nn::BatchNorm2d<T>>(out);
      net_.template add<nn::LeakyRelu<T>>(leak);
      in = out;
    }
    net_.template add<nn::GlobalAvgPool<T>>();
    net_.template add<nn::Dense<T>>(in, 1);
  }

  nn::Sequential<T>& net() { return net_; }
  void init(Rng& rng) { net_.init(rng); }

  std::vector<T> forward(const Tensor<T>& images, nn::Mode mode) {
    if (images.c() != 3 || images.n() < 1) throw ShapeError("sr discriminator: expected RGB batch, got " + images.shape().str());
    const Tensor<T> out = net_.forward(images, mode);
    std::vector<T> p(out.values().begin(), out.values().end());
    const nn::SigmoidFn sig;
    for (auto& v : p) v = sig.value(v);
    return p;
  }

  Tensor<T> backward(const std::vector<T>& grad_logits) {
    Tensor<T> g(static_cast<int>(grad_logits.size()), 1, 1, 1);
    std::copy(grad_logits.begin(), grad_logits.end(), g.data());
    return net_.backward(g);
  }

 private:
  SRDiscriminatorConfig cfg_;
  nn::Sequential<T> net_;
};

/// x4 upscaling in inference mode; per-sample computation.
template <typename T>
std::vector<NormalizedImage> upscale(SRGenerator<T>& gen, const std::vector<NormalizedImage>& lr) {
  const auto out = gen.forward(stack_images<T>(lr), nn::Mode::Inference);
  if (out.h() != lr.front().height * kScaleFactor || out.w() != lr.front().width * kScaleFactor)
    throw ShapeError("sr generator did not produce a x4 output");
  return unstack_images(out);
}

template <typename T>
NormalizedImage upscale(SRGenerator<T>& gen, const NormalizedImage& lr) {
  return upscale(gen, std::vector<NormalizedImage>{lr}).front();
}

}  // namespace chairgan::superres
