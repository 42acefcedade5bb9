#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/nn/adam.hpp"

namespace chairgan::synthesis {

/// DCGAN generator: a projection to base_resolution^2 feature maps followed
/// by `stages` fractional-strided convolutions, each doubling resolution.
struct GeneratorConfig {
  int latent_dim = 100;
  int stages = 4;
  int base_channels = 64;
  int base_resolution = 4;
  bool batch_norm = true;
  int image_channels = 3;

  int output_resolution() const { return base_resolution << stages; }
  /// Channels of the feature map after projection (s = 0) or stage s.
  int channels_at(int s) const { return base_channels << (stages - 1 - s); }

  void validate() const {
    if (latent_dim < 1) throw ConfigError("generator: latent_dim must be >= 1");
    if (stages < 1 || stages > 8) throw ConfigError("generator: stages must be in [1, 8]");
    if (base_channels < 1) throw ConfigError("generator: base_channels must be >= 1");
    if (base_resolution < 1) throw ConfigError("generator: base_resolution must be >= 1");
  }
};

/// Mirror of the generator: strided convolutions down to base_resolution,
/// then a linear read-out to one logit.
struct DiscriminatorConfig {
  int stages = 4;
  int base_channels = 64;
  double leak_slope = 0.2;
  bool batch_norm = true;

  int channels_at(int s) const { return base_channels << s; }

  void validate() const {
    if (stages < 1 || stages > 8) throw ConfigError("discriminator: stages must be in [1, 8]");
    if (base_channels < 1) throw ConfigError("discriminator: base_channels must be >= 1");
    if (!(leak_slope > 0.0 && leak_slope < 1.0)) throw ConfigError("discriminator: leak_slope must be in (0, 1)");
  }
};

enum class GeneratorLoss { NonSaturating, Saturating };

struct SynthesisConfig {
  GeneratorConfig generator{};
  DiscriminatorConfig discriminator{};
  nn::AdamConfig gen_adam{2e-4, 0.9, 0.999, 1e-8};
  nn::AdamConfig disc_adam{2e-4, 0.9, 0.999, 1e-8};
  GeneratorLoss loss = GeneratorLoss::NonSaturating;
  int batch_size = 128;
  int d_steps_per_g = 1;
  double latent_low = -1.0;
  double latent_high = 1.0;
  std::uint64_t seed = 0;
  /// Save an intermediate checkpoint every N steps; 0 disables.
  std::uint64_t checkpoint_every = 0;

  int resolution() const { return generator.output_resolution(); }

  void validate() const {
    generator.validate();
    discriminator.validate();
    if (discriminator.stages != generator.stages)
      throw ConfigError("discriminator stages must mirror generator stages");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (d_steps_per_g < 1) throw ConfigError("d_steps_per_g must be >= 1");
    if (!(latent_low < latent_high)) throw ConfigError("latent range is empty");
  }

  /// Desk-scale preset for acceptance runs at 32x32. The discriminator gets a
  /// quarter of the generator's width; at equal learning rates a wider one
  /// wins outright within a few hundred steps.
  static SynthesisConfig desk(int resolution = 32, int base_channels = 32) {
    SynthesisConfig c;
    int stages = 0;
    while ((4 << stages) < resolution) ++stages;
    if ((4 << stages) != resolution) throw ConfigError("resolution must be 4 * 2^stages");
    c.generator.stages = c.discriminator.stages = stages;
    c.generator.base_channels = base_channels;
    c.discriminator.base_channels = std::max(1, base_channels / 4);
    c.batch_size = 32;
    return c;
  }

  /// Settings of the original 38k-image run (200 epochs, batch 128).
  static SynthesisConfig paper() { return SynthesisConfig{}; }
};

NLOHMANN_JSON_SERIALIZE_ENUM(GeneratorLoss, {{GeneratorLoss::NonSaturating, "non_saturating"},
                                             {GeneratorLoss::Saturating, "saturating"}})

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"latent_dim", c.latent_dim},         {"stages", c.stages},         {"base_channels", c.base_channels},
       {"base_resolution", c.base_resolution}, {"batch_norm", c.batch_norm}, {"image_channels", c.image_channels}};
}
inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.stages = j.value("stages", c.stages);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.base_resolution = j.value("base_resolution", c.base_resolution);
  c.batch_norm = j.value("batch_norm", c.batch_norm);
  c.image_channels = j.value("image_channels", c.image_channels);
}
inline void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"stages", c.stages}, {"base_channels", c.base_channels}, {"leak_slope", c.leak_slope}, {"batch_norm", c.batch_norm}};
}
inline void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  c.stages = j.value("stages", c.stages);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.leak_slope = j.value("leak_slope", c.leak_slope);
  c.batch_norm = j.value("batch_norm", c.batch_norm);
}

}  // namespace chairgan::synthesis

namespace chairgan::nn {
inline void to_json(nlohmann::json& j, const AdamConfig& c) {
  j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}
inline void from_json(const nlohmann::json& j, AdamConfig& c) {
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
}
}  // namespace chairgan::nn

namespace chairgan::synthesis {
inline void to_json(nlohmann::json& j, const SynthesisConfig& c) {
  j = {{"generator", c.generator},
       {"discriminator", c.discriminator},
       {"gen_adam", c.gen_adam},
       {"disc_adam", c.disc_adam},
       {"loss", c.loss},
       {"batch_size", c.batch_size},
       {"d_steps_per_g", c.d_steps_per_g},
       {"latent_low", c.latent_low},
       {"latent_high", c.latent_high},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every}};
}
inline void from_json(const nlohmann::json& j, SynthesisConfig& c) {
  if (j.contains("generator")) j.at("generator").get_to(c.generator);
  if (j.contains("discriminator")) j.at("discriminator").get_to(c.discriminator);
  if (j.contains("gen_adam")) j.at("gen_adam").get_to(c.gen_adam);
  if (j.contains("disc_adam")) j.at("disc_adam").get_to(c.disc_adam);
  c.loss = j.value("loss", c.loss);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.d_steps_per_g = j.value("d_steps_per_g", c.d_steps_per_g);
  c.latent_low = j.value("latent_low", c.latent_low);
  c.latent_high = j.value("latent_high", c.latent_high);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
}
}  // namespace chairgan::synthesis
