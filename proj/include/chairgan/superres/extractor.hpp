#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/container.hpp"
#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/nn/conv.hpp"
#include "chairgan/nn/layers.hpp"
#include "chairgan/nn/sequential.hpp"
#include "chairgan/nn/state_io.hpp"

namespace chairgan::superres {

inline constexpr const char* kExtractorKind = "chairgan.extractor";

/// Address of a feature response: the `conv`-th convolution of the
/// `block`-th block (both 1-based). Post-activation unless requested.
struct LayerAddress {
  int block = 5;
  int conv = 4;
  bool pre_activation = false;

  friend bool operator==(const LayerAddress&, const LayerAddress&) = default;
};

/// VGG-style stack: blocks of 3x3 convolutions with ReLU, separated by 2x2
/// max pooling. `kind` is "random" (seeded He-normal weights) or "pretrained"
/// (weights read from `weights_path`).
struct ExtractorConfig {
  std::string kind = "random";
  std::vector<int> convs_per_block{2, 2};
  std::vector<int> block_channels{16, 32};
  std::uint64_t seed = 0x5647'47ull;
  std::string weights_path;
  /// Map [-1,1] input to ImageNet mean/std normalised RGB before the stack.
  bool imagenet_normalize = false;

  void validate() const {
    if (convs_per_block.empty() || convs_per_block.size() != block_channels.size())
      throw ConfigError("extractor: convs_per_block and block_channels must be non-empty and of equal length");
    for (int c : convs_per_block)
      if (c < 1) throw ConfigError("extractor: every block needs at least one convolution");
    if (kind != "random" && kind != "pretrained") throw ConfigError("extractor: unknown kind " + kind);
    if (kind == "pretrained" && weights_path.empty()) throw ConfigError("extractor: pretrained kind needs weights_path");
  }

  /// VGG19 layout; weights must be supplied as a converted container.
  static ExtractorConfig vgg19(std::string weights) {
    ExtractorConfig c;
    c.kind = "pretrained";
    c.convs_per_block = {2, 2, 4, 4, 4};
    c.block_channels = {64, 128, 256, 512, 512};
    c.weights_path = std::move(weights);
    c.imagenet_normalize = true;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const LayerAddress& a) {
  j = {{"block", a.block}, {"conv", a.conv}, {"pre_activation", a.pre_activation}};
}
inline void from_json(const nlohmann::json& j, LayerAddress& a) {
  a.block = j.value("block", a.block);
  a.conv = j.value("conv", a.conv);
  a.pre_activation = j.value("pre_activation", a.pre_activation);
}
inline void to_json(nlohmann::json& j, const ExtractorConfig& c) {
  j = {{"kind", c.kind},       {"convs_per_block", c.convs_per_block}, {"block_channels", c.block_channels},
       {"seed", c.seed},       {"weights_path", c.weights_path},       {"imagenet_normalize", c.imagenet_normalize}};
}
inline void from_json(const nlohmann::json& j, ExtractorConfig& c) {
  c.kind = j.value("kind", c.kind);
  c.convs_per_block = j.value("convs_per_block", c.convs_per_block);
  c.block_channels = j.value("block_channels", c.block_channels);
  c.seed = j.value("seed", c.seed);
  c.weights_path = j.value("weights_path", c.weights_path);
  c.imagenet_normalize = j.value("imagenet_normalize", c.imagenet_normalize);
}

/// Frozen feature function phi. No parameter ever receives a gradient; only
/// input gradients are propagated.
template <typename T>
class FeatureExtractor {
 public:
  FeatureExtractor(const ExtractorConfig& cfg, const LayerAddress& at) : cfg_(cfg), at_(at) {
    cfg_.validate();
    if (at.block < 1 || at.block > static_cast<int>(cfg_.convs_per_block.size()))
      throw ConfigError("extractor: block " + std::to_string(at.block) + " does not exist");
    if (at.conv < 1 || at.conv > cfg_.convs_per_block[static_cast<std::size_t>(at.block - 1)])
      throw ConfigError("extractor: conv " + std::to_string(at.conv) + " does not exist in block " +
                        std::to_string(at.block));
    int in = 3;
    for (int b = 1; b <= at.block; ++b) {
      if (b > 1) net_.template add<nn::MaxPool2d<T>>(2);
      const int width = cfg_.block_channels[static_cast<std::size_t>(b - 1)];
      const int convs = b == at.block ? at.conv : cfg_.convs_per_block[static_cast<std::size_t>(b - 1)];
      for (int j = 1; j <= convs; ++j) {
        net_.template add<nn::Conv2d<T>>(in, width, 3, 1, 1, true, -1.0);
        in = width;
        if (!(b == at.block && j == convs && at.pre_activation)) net_.template add<nn::Relu<T>>();
      }
    }
    if (cfg_.kind == "random") {
      Rng rng(cfg_.seed);
      net_.init(rng);
    } else {
      load_weights(cfg_.weights_path);
    }
    net_.set_frozen(true);
  }

  const ExtractorConfig& config() const { return cfg_; }
  const LayerAddress& address() const { return at_; }

  /// Features of images in [-1, 1]. Train mode keeps activations for backward.
  Tensor<T> forward(const Tensor<T>& images, nn::Mode mode) {
    if (images.c() != 3) throw ShapeError("extractor: expected RGB input, got " + images.shape().str());
    return net_.forward(cfg_.imagenet_normalize ? normalize_input(images) : images, mode);
  }

  /// Gradient w.r.t. the [-1, 1] input of the last train-mode forward.
  Tensor<T> backward(const Tensor<T>& grad_features) {
    Tensor<T> g = net_.backward(grad_features);
    if (cfg_.imagenet_normalize) {
      const std::size_t plane = static_cast<std::size_t>(g.h()) * g.w();
      for (int n = 0; n < g.n(); ++n)
        for (int c = 0; c < 3; ++c) {
          const T s = static_cast<T>(0.5 / kStd[static_cast<std::size_t>(c)]);
          T* p = g.sample(n).data() + c * plane;
          for (std::size_t j = 0; j < plane; ++j) p[j] *= s;
        }
    }
    return g;
  }

  /// SHA-256 over all weights; changes iff any parameter changes.
  std::string fingerprint() {
    Sha256 h;
    for (const auto& r : net_.parameters()) {
      h.update(r.name);
      h.update(std::span(reinterpret_cast<const std::uint8_t*>(r.param->value.data()), r.param->value.size() * sizeof(T)));
    }
    return to_hex(h.finish());
  }

  nn::Sequential<T>& net() { return net_; }

 private:
  static constexpr std::array<double, 3> kMean{0.485, 0.456, 0.406};
  static constexpr std::array<double, 3> kStd{0.229, 0.224, 0.225};

  Tensor<T> normalize_input(const Tensor<T>& x) const {
    Tensor<T> y(x.shape());
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < 3; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const T* p = x.sample(n).data() + c * plane;
        T* q = y.sample(n).data() + c * plane;
        for (std::size_t j = 0; j < plane; ++j)
          q[j] = static_cast<T>(((static_cast<double>(p[j]) + 1.0) * 0.5 - kMean[ci]) / kStd[ci]);
      }
    return y;
  }

  /// Weights container: kind chairgan.extractor, one section per conv
  /// parameter named "<layer index>.weight" / "<layer index>.bias" for the
  /// full (untruncated) stack. Only the prefix in use is read.
  void load_weights(const std::string& path) {
    const Container c = load_container(path);
    if (c.kind != kExtractorKind) throw CheckpointError(path + " is not an extractor weights container");
    const std::string scalar = c.header.value("scalar", "f32");
    for (const auto& r : net_.parameters()) {
      const auto& bytes = c.at(r.name);
      std::vector<T> values;
      if (scalar == "f32") {
        const auto f = unpack_values<float>(bytes);
        values.assign(f.begin(), f.end());
      } else {
        const auto d = unpack_values<double>(bytes);
        values.assign(d.begin(), d.end());
      }
      if (values.size() != r.param->size()) throw CheckpointError("extractor weight size mismatch at " + r.name);
      r.param->value.assign(values.begin(), values.end());
    }
  }

  ExtractorConfig cfg_;
  LayerAddress at_;
  nn::Sequential<T> net_;
};

}  // namespace chairgan::superres
