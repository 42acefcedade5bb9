#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/container.hpp"
#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/core/image.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/dataset/ingest.hpp"
#include "chairgan/dataset/minibatch.hpp"
#include "chairgan/nn/adam.hpp"
#include "chairgan/nn/state_io.hpp"
#include "chairgan/synthesis/config.hpp"
#include "chairgan/synthesis/losses.hpp"
#include "chairgan/synthesis/networks.hpp"

namespace chairgan::synthesis {

inline constexpr std::uint64_t kInitStream = 0x494e4954ull;   // "INIT"
inline constexpr std::uint64_t kNoiseStream = 0x4e4f495345ull;  // "NOISE"
inline constexpr const char* kCheckpointKind = "chairgan.synthesis";

struct LossRecord {
  std::uint64_t step = 0;
  double loss_g = 0.0;
  double loss_d = 0.0;
  double mean_d_real = 0.0;
  double mean_d_fake = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

template <typename T>
struct TrainState {
  SynthesisConfig config;
  Generator<T> gen;
  Discriminator<T> disc;
  nn::Adam<T> gen_opt;
  nn::Adam<T> disc_opt;
  Rng rng;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  bool diverged = false;
  std::vector<LossRecord> history;

  explicit TrainState(const SynthesisConfig& cfg)
      : config(cfg), gen(cfg.generator), disc(cfg.discriminator, cfg.resolution(), cfg.generator.image_channels),
        gen_opt(cfg.gen_adam), disc_opt(cfg.disc_adam) {}
};

/// Fresh state with seeded weights: N(0, 0.02) for weights, N(1, 0.02) for
/// batch-norm scales.
template <typename T>
TrainState<T> init_train_state(const SynthesisConfig& cfg) {
  cfg.validate();
  TrainState<T> s(cfg);
  Rng init_rng(derive_seed(cfg.seed, kInitStream));
  s.gen.init(init_rng);
  s.disc.init(init_rng);
  s.rng = Rng(derive_seed(cfg.seed, kNoiseStream));
  return s;
}

template <typename T>
Tensor<T> sample_noise(Rng& rng, int n, const SynthesisConfig& cfg) {
  Tensor<T> z(n, cfg.generator.latent_dim, 1, 1);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<T>(rng.uniform(cfg.latent_low, cfg.latent_high));
  return z;
}

template <typename T>
double mean_of(const std::vector<T>& v) {
  double acc = 0.0;
  for (T x : v) acc += static_cast<double>(x);
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

namespace detail {

template <typename T>
void clear_caches(TrainState<T>& s) {
  s.gen.net().clear_cache();
  s.disc.net().clear_cache();
}

}  // namespace detail

/// One discriminator update (repeated d_steps_per_g times) on the real batch
/// and a fresh fake batch, then one generator update on another fresh fake
/// batch. Throws TrainingDiverged and leaves `state` untouched if any loss is
/// not finite.
template <typename T>
void train_step(TrainState<T>& state, const Tensor<T>& real) {
  if (real.n() < 1) throw EmptyDataset("train_step: empty real batch");
  detail::clear_caches(state);
  const TrainState<T> backup = state;
  const int n = real.n();
  const auto& cfg = state.config;

  std::vector<T> p_real, p_fake;
  for (int k = 0; k < cfg.d_steps_per_g; ++k) {
    const Tensor<T> fake = state.gen.forward(sample_noise<T>(state.rng, n, cfg), nn::Mode::Train);
    state.disc.net().zero_grad();
    p_real = state.disc.forward(real, nn::Mode::Train);
    state.disc.backward(grad_neg_log_p(std::span<const T>(p_real)));
    p_fake = state.disc.forward(fake, nn::Mode::Train);
    state.disc.backward(grad_neg_log_one_minus_p(std::span<const T>(p_fake)));
    state.disc_opt.step(state.disc.net().parameters());
  }

  const Tensor<T> fake = state.gen.forward(sample_noise<T>(state.rng, n, cfg), nn::Mode::Train);
  state.gen.net().zero_grad();
  state.disc.net().set_frozen(true);
  const std::vector<T> p_gen = state.disc.forward(fake, nn::Mode::Train);
  const Tensor<T> g_img = state.disc.backward(generator_loss_grad(std::span<const T>(p_gen), cfg.loss));
  state.disc.net().set_frozen(false);
  state.gen.backward(g_img);
  state.gen_opt.step(state.gen.net().parameters());

  const auto d_losses = adversarial_losses(p_real, p_fake, cfg.loss);
  const auto g_losses = adversarial_losses(p_real, p_gen, cfg.loss);
  LossRecord rec{state.step + 1, g_losses.loss_g, d_losses.loss_d, mean_of(p_real), mean_of(p_fake)};
  if (!std::isfinite(rec.loss_g) || !std::isfinite(rec.loss_d) || !std::isfinite(rec.mean_d_real) ||
      !std::isfinite(rec.mean_d_fake)) {
    state = backup;
    throw TrainingDiverged("non-finite loss at step " + std::to_string(rec.step));
  }
  ++state.step;
  state.history.push_back(rec);
  detail::clear_caches(state);
}

// ---------------------------------------------------------------------------
// Checkpoints

template <typename T>
Container to_container(TrainState<T>& s) {
  Container c;
  c.kind = kCheckpointKind;
  c.header = {{"scalar", nn::scalar_tag<T>()},
              {"config", s.config},
              {"step", s.step},
              {"epoch", s.epoch},
              {"diverged", s.diverged},
              {"rng_state", s.rng.state()}};
  nn::store_arrays(c, "gen.param.", s.gen.net().parameters());
  nn::store_arrays(c, "gen.buffer.", s.gen.net().buffers());
  nn::store_arrays(c, "disc.param.", s.disc.net().parameters());
  nn::store_arrays(c, "disc.buffer.", s.disc.net().buffers());
  nn::store_adam(c, "gen.adam.", s.gen_opt);
  nn::store_adam(c, "disc.adam.", s.disc_opt);
  std::vector<double> hist;
  hist.reserve(s.history.size() * 5);
  for (const auto& r : s.history) {
    hist.insert(hist.end(), {static_cast<double>(r.step), r.loss_g, r.loss_d, r.mean_d_real, r.mean_d_fake});
  }
  c.add("history", pack_values(std::span<const double>(hist)));
  return c;
}

template <typename T>
TrainState<T> from_container(const Container& c) {
  if (c.kind != kCheckpointKind) throw CheckpointError("checkpoint kind '" + c.kind + "' is not a synthesis checkpoint");
  if (c.header.value("scalar", "") != nn::scalar_tag<T>())
    throw CheckpointError("checkpoint scalar type " + c.header.value("scalar", std::string("?")) + " does not match");
  SynthesisConfig cfg;
  try {
    cfg = c.header.at("config").get<SynthesisConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  TrainState<T> s(cfg);
  s.step = c.header.at("step").get<std::uint64_t>();
  s.epoch = c.header.at("epoch").get<std::uint64_t>();
  s.diverged = c.header.at("diverged").get<bool>();
  s.rng.set_state(c.header.at("rng_state").get<std::string>());
  nn::load_arrays(c, "gen.param.", s.gen.net().parameters());
  nn::load_arrays(c, "gen.buffer.", s.gen.net().buffers());
  nn::load_arrays(c, "disc.param.", s.disc.net().parameters());
  nn::load_arrays(c, "disc.buffer.", s.disc.net().buffers());
  nn::load_adam(c, "gen.adam.", s.gen_opt, s.gen.net().parameters());
  nn::load_adam(c, "disc.adam.", s.disc_opt, s.disc.net().parameters());
  const auto hist = unpack_values<double>(c.at("history"));
  if (hist.size() % 5 != 0) throw CheckpointError("malformed loss history");
  for (std::size_t i = 0; i < hist.size(); i += 5)
    s.history.push_back({static_cast<std::uint64_t>(hist[i]), hist[i + 1], hist[i + 2], hist[i + 3], hist[i + 4]});
  return s;
}

/// Immutable handle to a checkpoint on disk.
struct ModelCheckpoint {
  std::filesystem::path path;
  std::string hash;
  std::uint64_t step = 0;
  bool diverged = false;
};

template <typename T>
ModelCheckpoint save_checkpoint(const std::filesystem::path& path, TrainState<T>& s) {
  const auto bytes = encode_container(to_container(s));
  write_file_bytes(path, bytes);
  return {path, container_hash(bytes), s.step, s.diverged};
}

template <typename T = float>
TrainState<T> load_checkpoint(const std::filesystem::path& path) {
  return from_container<T>(load_container(path));
}

inline std::string checkpoint_hash(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  decode_container(bytes);
  return container_hash(bytes);
}

inline std::string format_history_csv(const std::vector<LossRecord>& history) {
  std::string out = "step,loss_g,loss_d,mean_d_real,mean_d_fake\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(r.step), r.loss_g,
                  r.loss_d, r.mean_d_real, r.mean_d_fake);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainOptions {
  std::uint64_t epochs = 1;
  /// Optional cap on the total number of steps (counted from step 0).
  std::optional<std::uint64_t> max_steps;
  /// Continue from this checkpoint instead of a fresh initialisation.
  std::optional<std::filesystem::path> resume_from;
  bool verbose = false;
};

template <typename T>
struct TrainResult {
  TrainState<T> state;
  ModelCheckpoint checkpoint;
};

/// Runs epochs x ceil(N / batch) steps over the manifest's train split,
/// writing `final.ckpt` and `loss_history.csv` (plus periodic checkpoints)
/// into checkpoint_dir. On divergence the last good state is saved with the
/// diverged flag set.
template <typename T = float>
TrainResult<T> train_synthesis(const SynthesisConfig& config, const std::vector<NormalizedImage>& train_images,
                               const std::filesystem::path& checkpoint_dir, const TrainOptions& opts) {
  if (train_images.empty()) throw EmptyDataset("train_synthesis: empty train split");
  for (const auto& img : train_images)
    if (img.height != config.resolution() || img.width != config.resolution() || img.channels != config.generator.image_channels)
      throw ShapeError("train_synthesis: training images must be " + std::to_string(config.resolution()) + "px");
  std::error_code ec;
  std::filesystem::create_directories(checkpoint_dir, ec);
  if (ec) throw IoError("cannot create " + checkpoint_dir.string());

  TrainState<T> state = opts.resume_from ? load_checkpoint<T>(*opts.resume_from) : init_train_state<T>(config);
  if (opts.resume_from) {
    nlohmann::json a = state.config, b = config;
    if (a != b) throw CheckpointError("resume: checkpoint config differs from requested config");
  }

  std::vector<std::size_t> ids(train_images.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::uint64_t per_epoch = dataset::batches_per_epoch(ids.size(), batch);
  std::uint64_t total = opts.epochs * per_epoch;
  if (opts.max_steps) total = std::min(total, *opts.max_steps);

  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::vector<std::size_t>> batches;
  while (state.step < total && !state.diverged) {
    const std::uint64_t epoch = state.step / per_epoch;
    if (epoch != cached_epoch) {
      batches = dataset::minibatches(ids, batch, config.seed, epoch);
      cached_epoch = epoch;
    }
    const auto& b = batches[static_cast<std::size_t>(state.step % per_epoch)];
    std::vector<NormalizedImage> imgs;
    imgs.reserve(b.size());
    for (auto i : b) imgs.push_back(train_images[i]);
    state.epoch = epoch;
    try {
      train_step(state, stack_images<T>(imgs));
    } catch (const TrainingDiverged&) {
      state.diverged = true;
      break;
    }
    if (opts.verbose && state.step % 50 == 0) {
      const auto& r = state.history.back();
      std::fprintf(stderr, "step %llu  loss_g %.4f  loss_d %.4f  D(x) %.3f  D(G(z)) %.3f\n",
                   static_cast<unsigned long long>(r.step), r.loss_g, r.loss_d, r.mean_d_real, r.mean_d_fake);
    }
    if (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0)
      save_checkpoint(checkpoint_dir / ("step_" + std::to_string(state.step) + ".ckpt"), state);
  }
  auto ckpt = save_checkpoint(checkpoint_dir / "final.ckpt", state);
  write_text_file(checkpoint_dir / "loss_history.csv", format_history_csv(state.history));
  return {std::move(state), std::move(ckpt)};
}

/// Manifest-driven entry point: preprocesses the train split at the
/// generator's output resolution.
template <typename T = float>
TrainResult<T> train_synthesis(const SynthesisConfig& config, const dataset::DatasetManifest& manifest,
                               const std::filesystem::path& checkpoint_dir, const TrainOptions& opts) {
  if (manifest.train.empty()) throw EmptyDataset("train_synthesis: manifest train split is empty");
  return train_synthesis<T>(config, dataset::load_images(manifest, manifest.train, config.resolution()), checkpoint_dir,
                            opts);
}

}  // namespace chairgan::synthesis
