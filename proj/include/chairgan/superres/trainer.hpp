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
#include "chairgan/core/resample.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/dataset/minibatch.hpp"
#include "chairgan/dataset/pairs.hpp"
#include "chairgan/nn/adam.hpp"
#include "chairgan/nn/state_io.hpp"
#include "chairgan/synthesis/config.hpp"
#include "chairgan/synthesis/losses.hpp"
#include "chairgan/synthesis/trainer.hpp"
#include "chairgan/superres/extractor.hpp"
#include "chairgan/superres/losses.hpp"
#include "chairgan/superres/network.hpp"

namespace chairgan::superres {

inline constexpr const char* kSrCheckpointKind = "chairgan.superres";
inline constexpr std::uint64_t kSrInitStream = 0x5352494e4954ull;  // "SRINIT"
inline constexpr std::uint64_t kPatchStream = 0x5041544348ull;     // "PATCH"

struct SRConfig {
  int scale_factor = kScaleFactor;
  SRGeneratorConfig generator;
  SRDiscriminatorConfig discriminator;
  ExtractorConfig extractor;
  LayerAddress content_layer{5, 4, false};
  double adversarial_weight = 1e-3;
  std::uint64_t content_only_steps = 2000;
  std::uint64_t adversarial_steps = 0;
  int batch_size = 16;
  /// Side of the random low-resolution training crop; 0 trains on whole images.
  int patch_size = 16;
  nn::AdamConfig gen_adam{1e-4, 0.9, 0.999, 1e-8};
  nn::AdamConfig disc_adam{1e-4, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;

  void validate() const {
    if (scale_factor != kScaleFactor) throw ConfigError("sr: scale_factor must be 4");
    if (!(adversarial_weight >= 0.0) || !std::isfinite(adversarial_weight))
      throw ConfigError("sr: adversarial_weight must be >= 0");
    if (batch_size < 1) throw ConfigError("sr: batch_size must be >= 1");
    if (patch_size < 0) throw ConfigError("sr: patch_size must be >= 0");
    generator.validate();
    discriminator.validate();
    extractor.validate();
  }

  /// Small random-convolution extractor; runs on a CPU in minutes.
  static SRConfig desk() {
    SRConfig c;
    c.extractor = ExtractorConfig{};
    c.content_layer = {1, 2, false};
    c.gen_adam.lr = 1e-3;
    return c;
  }

  /// VGG19 features at block 5, conv 4; weights are supplied separately.
  static SRConfig vgg19(std::string weights) {
    SRConfig c;
    c.extractor = ExtractorConfig::vgg19(std::move(weights));
    c.content_layer = {5, 4, false};
    return c;
  }
};

inline void to_json(nlohmann::json& j, const SRConfig& c) {
  j = {{"scale_factor", c.scale_factor},
       {"generator", c.generator},
       {"discriminator", c.discriminator},
       {"extractor", c.extractor},
       {"content_layer", c.content_layer},
       {"adversarial_weight", c.adversarial_weight},
       {"content_only_steps", c.content_only_steps},
       {"adversarial_steps", c.adversarial_steps},
       {"batch_size", c.batch_size},
       {"patch_size", c.patch_size},
       {"gen_adam", c.gen_adam},
       {"disc_adam", c.disc_adam},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every}};
}

inline void from_json(const nlohmann::json& j, SRConfig& c) {
  c.scale_factor = j.value("scale_factor", c.scale_factor);
  c.generator = j.value("generator", c.generator);
  c.discriminator = j.value("discriminator", c.discriminator);
  c.extractor = j.value("extractor", c.extractor);
  c.content_layer = j.value("content_layer", c.content_layer);
  c.adversarial_weight = j.value("adversarial_weight", c.adversarial_weight);
  c.content_only_steps = j.value("content_only_steps", c.content_only_steps);
  c.adversarial_steps = j.value("adversarial_steps", c.adversarial_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.gen_adam = j.value("gen_adam", c.gen_adam);
  c.disc_adam = j.value("disc_adam", c.disc_adam);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
}

enum class Phase { ContentOnly, Adversarial };

inline const char* phase_name(Phase p) { return p == Phase::ContentOnly ? "content_only" : "adversarial"; }

struct SRLossRecord {
  std::uint64_t step = 0;
  Phase phase = Phase::ContentOnly;
  double content = 0.0;
  double loss_g = 0.0;
  /// Zero during the content-only phase.
  double loss_d = 0.0;

  friend bool operator==(const SRLossRecord&, const SRLossRecord&) = default;
};

template <typename T>
struct SRTrainState {
  SRConfig config;
  SRGenerator<T> gen;
  SRDiscriminator<T> disc;
  FeatureExtractor<T> extractor;
  nn::Adam<T> gen_opt;
  nn::Adam<T> disc_opt;
  Rng rng;
  std::uint64_t step = 0;
  Phase phase = Phase::ContentOnly;
  bool diverged = false;
  std::vector<SRLossRecord> history;

  explicit SRTrainState(const SRConfig& cfg)
      : config(cfg), gen(cfg.generator), disc(cfg.discriminator), extractor(cfg.extractor, cfg.content_layer),
        gen_opt(cfg.gen_adam), disc_opt(cfg.disc_adam) {}
};

template <typename T>
SRTrainState<T> init_sr_state(const SRConfig& cfg) {
  cfg.validate();
  SRTrainState<T> s(cfg);
  Rng init_rng(derive_seed(cfg.seed, kSrInitStream));
  s.gen.init(init_rng);
  s.disc.init(init_rng);
  s.rng = Rng(derive_seed(cfg.seed, kPatchStream));
  s.phase = cfg.content_only_steps > 0 ? Phase::ContentOnly : Phase::Adversarial;
  return s;
}

/// One update on an aligned (lr, hr) batch. The content-only phase updates
/// the generator on the perceptual loss alone; the adversarial phase first
/// updates the discriminator, then the generator on
/// content + weight * (-log D(G(lr))).
template <typename T>
void sr_train_step(SRTrainState<T>& state, const Tensor<T>& lr, const Tensor<T>& hr) {
  if (lr.n() < 1) throw EmptyDataset("sr_train_step: empty batch");
  if (hr.n() != lr.n() || hr.h() != lr.h() * kScaleFactor || hr.w() != lr.w() * kScaleFactor)
    throw ShapeError("sr_train_step: hr batch " + hr.shape().str() + " is not x4 of " + lr.shape().str());
  state.gen.clear_cache();
  state.disc.net().clear_cache();
  const SRTrainState<T> backup = state;
  const Phase phase = state.phase;

  const Tensor<T> sr = state.gen.forward(lr, nn::Mode::Train);
  const Tensor<T> phi_hr = state.extractor.forward(hr, nn::Mode::Inference);
  const Tensor<T> phi_sr = state.extractor.forward(sr, nn::Mode::Train);
  const double content = perceptual_content_loss(phi_hr, phi_sr);
  Tensor<T> g_img = state.extractor.backward(perceptual_content_grad(phi_hr, phi_sr));
  state.extractor.net().clear_cache();

  SRLossRecord rec{state.step + 1, phase, content, content, 0.0};
  if (phase == Phase::Adversarial) {
    state.disc.net().zero_grad();
    const std::vector<T> p_hr = state.disc.forward(hr, nn::Mode::Train);
    state.disc.backward(synthesis::grad_neg_log_p(std::span<const T>(p_hr)));
    const std::vector<T> p_sr = state.disc.forward(sr, nn::Mode::Train);
    state.disc.backward(synthesis::grad_neg_log_one_minus_p(std::span<const T>(p_sr)));
    state.disc_opt.step(state.disc.net().parameters());

    state.disc.net().set_frozen(true);
    const std::vector<T> p_gen = state.disc.forward(sr, nn::Mode::Train);
    std::vector<T> g_logits = synthesis::grad_neg_log_p(std::span<const T>(p_gen));
    const T w = static_cast<T>(state.config.adversarial_weight);
    for (auto& g : g_logits) g *= w;
    const Tensor<T> g_adv = state.disc.backward(g_logits);
    state.disc.net().set_frozen(false);
    for (std::size_t i = 0; i < g_img.size(); ++i) g_img[i] += g_adv[i];

    const auto losses = sr_losses(p_hr, p_gen, content, state.config.adversarial_weight);
    rec.loss_g = losses.loss_g_sr;
    rec.loss_d = sr_losses(p_hr, p_sr, content, state.config.adversarial_weight).loss_d_sr;
  }
  state.gen.net().zero_grad();
  state.gen.backward(g_img);
  state.gen_opt.step(state.gen.net().parameters());

  if (!std::isfinite(rec.content) || !std::isfinite(rec.loss_g) || !std::isfinite(rec.loss_d)) {
    state = backup;
    throw TrainingDiverged("non-finite sr loss at step " + std::to_string(rec.step));
  }
  ++state.step;
  if (state.phase == Phase::ContentOnly && state.step >= state.config.content_only_steps) state.phase = Phase::Adversarial;
  state.history.push_back(rec);
  state.gen.clear_cache();
  state.disc.net().clear_cache();
}

// ---------------------------------------------------------------------------
// Checkpoints

template <typename T>
Container to_container(SRTrainState<T>& s) {
  Container c;
  c.kind = kSrCheckpointKind;
  c.header = {{"scalar", nn::scalar_tag<T>()}, {"config", s.config},
              {"step", s.step},                {"phase", phase_name(s.phase)},
              {"diverged", s.diverged},        {"rng_state", s.rng.state()},
              {"extractor_fingerprint", s.extractor.fingerprint()}};
  nn::store_arrays(c, "gen.param.", s.gen.net().parameters());
  nn::store_arrays(c, "disc.param.", s.disc.net().parameters());
  nn::store_arrays(c, "disc.buffer.", s.disc.net().buffers());
  nn::store_adam(c, "gen.adam.", s.gen_opt);
  nn::store_adam(c, "disc.adam.", s.disc_opt);
  std::vector<double> hist;
  hist.reserve(s.history.size() * 5);
  for (const auto& r : s.history)
    hist.insert(hist.end(), {static_cast<double>(r.step), r.phase == Phase::Adversarial ? 1.0 : 0.0, r.content,
                             r.loss_g, r.loss_d});
  c.add("history", pack_values(std::span<const double>(hist)));
  return c;
}

template <typename T>
SRTrainState<T> sr_from_container(const Container& c) {
  if (c.kind != kSrCheckpointKind) throw CheckpointError("checkpoint kind '" + c.kind + "' is not a superres checkpoint");
  if (c.header.value("scalar", "") != nn::scalar_tag<T>()) throw CheckpointError("checkpoint scalar type does not match");
  SRConfig cfg;
  try {
    cfg = c.header.at("config").get<SRConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  SRTrainState<T> s(cfg);
  if (s.extractor.fingerprint() != c.header.value("extractor_fingerprint", ""))
    throw CheckpointError("feature extractor weights differ from the ones used for training");
  s.step = c.header.at("step").get<std::uint64_t>();
  s.phase = c.header.at("phase").get<std::string>() == "adversarial" ? Phase::Adversarial : Phase::ContentOnly;
  s.diverged = c.header.at("diverged").get<bool>();
  s.rng.set_state(c.header.at("rng_state").get<std::string>());
  nn::load_arrays(c, "gen.param.", s.gen.net().parameters());
  nn::load_arrays(c, "disc.param.", s.disc.net().parameters());
  nn::load_arrays(c, "disc.buffer.", s.disc.net().buffers());
  nn::load_adam(c, "gen.adam.", s.gen_opt, s.gen.net().parameters());
  nn::load_adam(c, "disc.adam.", s.disc_opt, s.disc.net().parameters());
  const auto hist = unpack_values<double>(c.at("history"));
  if (hist.size() % 5 != 0) throw CheckpointError("malformed loss history");
  for (std::size_t i = 0; i < hist.size(); i += 5)
    s.history.push_back({static_cast<std::uint64_t>(hist[i]), hist[i + 1] != 0.0 ? Phase::Adversarial : Phase::ContentOnly,
                         hist[i + 2], hist[i + 3], hist[i + 4]});
  return s;
}

template <typename T>
synthesis::ModelCheckpoint save_sr_checkpoint(const std::filesystem::path& path, SRTrainState<T>& s) {
  const auto bytes = encode_container(to_container(s));
  write_file_bytes(path, bytes);
  return {path, container_hash(bytes), s.step, s.diverged};
}

template <typename T = float>
SRTrainState<T> load_sr_checkpoint(const std::filesystem::path& path) {
  return sr_from_container<T>(load_container(path));
}

/// Generator weights only, for inference; the extractor is not constructed.
template <typename T = float>
SRGenerator<T> load_sr_generator(const std::filesystem::path& path) {
  const Container c = load_container(path);
  if (c.kind != kSrCheckpointKind) throw CheckpointError(path.string() + " is not a superres checkpoint");
  if (c.header.value("scalar", "") != nn::scalar_tag<T>()) throw CheckpointError("checkpoint scalar type does not match");
  SRConfig cfg;
  try {
    cfg = c.header.at("config").get<SRConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  SRGenerator<T> gen(cfg.generator);
  nn::load_arrays(c, "gen.param.", gen.net().parameters());
  return gen;
}

inline std::string format_sr_history_csv(const std::vector<SRLossRecord>& history) {
  std::string out = "step,phase,content,loss_g,loss_d\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%llu,%s,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(r.step),
                  phase_name(r.phase), r.content, r.loss_g, r.loss_d);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fine-tuning loop

struct FinetuneOptions {
  std::optional<std::filesystem::path> resume_from;
  /// Initialise generator weights from another superres checkpoint; the
  /// step counter and optimizer state start fresh.
  std::optional<std::filesystem::path> warm_start;
  bool verbose = false;
};

template <typename T>
struct SRTrainResult {
  SRTrainState<T> state;
  synthesis::ModelCheckpoint checkpoint;
};

/// Aligned random crops: an lr patch of side `patch` and the matching hr patch.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> sample_patches(const std::vector<dataset::ResolutionPair>& pairs,
                                               const std::vector<std::size_t>& batch, int patch, Rng& rng) {
  std::vector<NormalizedImage> lrs, hrs;
  for (auto i : batch) {
    const auto& p = pairs[i];
    if (patch <= 0 || (patch >= p.lr.width && patch >= p.lr.height)) {
      lrs.push_back(p.lr);
      hrs.push_back(p.hr);
      continue;
    }
    const int pw = std::min(patch, p.lr.width), ph = std::min(patch, p.lr.height);
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.lr.width - pw + 1)));
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.lr.height - ph + 1)));
    lrs.push_back(crop(p.lr, x, y, pw, ph));
    hrs.push_back(crop(p.hr, x * kScaleFactor, y * kScaleFactor, pw * kScaleFactor, ph * kScaleFactor));
  }
  return {stack_images<T>(lrs), stack_images<T>(hrs)};
}

template <typename T = float>
SRTrainResult<T> finetune_sr(const SRConfig& config, const std::vector<dataset::ResolutionPair>& pairs,
                             const std::filesystem::path& checkpoint_dir, const FinetuneOptions& opts = {}) {
  if (pairs.empty()) throw EmptyDataset("finetune_sr: no training pairs");
  const auto& ref = pairs.front();
  for (const auto& p : pairs) {
    if (p.hr.width != p.lr.width * kScaleFactor || p.hr.height != p.lr.height * kScaleFactor)
      throw ShapeError("finetune_sr: pair " + p.source_id + " is not a x4 pair");
    if (!p.lr.same_shape(ref.lr)) throw ShapeError("finetune_sr: all pairs must share one size");
  }
  std::error_code ec;
  std::filesystem::create_directories(checkpoint_dir, ec);
  if (ec) throw IoError("cannot create " + checkpoint_dir.string());

  SRTrainState<T> state = opts.resume_from ? load_sr_checkpoint<T>(*opts.resume_from) : init_sr_state<T>(config);
  if (opts.resume_from) {
    nlohmann::json a = state.config, b = config;
    if (a != b) throw CheckpointError("resume: checkpoint config differs from requested config");
  } else if (opts.warm_start) {
    SRTrainState<T> src = load_sr_checkpoint<T>(*opts.warm_start);
    nlohmann::json a = src.config.generator, b = config.generator;
    if (a != b) throw CheckpointError("warm start: generator architecture differs");
    auto dst = state.gen.net().parameters();
    auto from = src.gen.net().parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].param->value = from[i].param->value;
  }

  std::vector<std::size_t> ids(pairs.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::uint64_t per_epoch = dataset::batches_per_epoch(ids.size(), batch);
  const std::uint64_t total = config.content_only_steps + config.adversarial_steps;

  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::vector<std::size_t>> batches;
  while (state.step < total && !state.diverged) {
    const std::uint64_t epoch = state.step / per_epoch;
    if (epoch != cached_epoch) {
      batches = dataset::minibatches(ids, batch, config.seed, epoch);
      cached_epoch = epoch;
    }
    const auto& b = batches[static_cast<std::size_t>(state.step % per_epoch)];
    auto [lr, hr] = sample_patches<T>(pairs, b, config.patch_size, state.rng);
    try {
      sr_train_step(state, lr, hr);
    } catch (const TrainingDiverged&) {
      state.diverged = true;
      break;
    }
    if (opts.verbose && state.step % 100 == 0) {
      const auto& r = state.history.back();
      std::fprintf(stderr, "sr step %llu  %s  content %.5f  loss_g %.5f  loss_d %.4f\n",
                   static_cast<unsigned long long>(r.step), phase_name(r.phase), r.content, r.loss_g, r.loss_d);
    }
    if (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0)
      save_sr_checkpoint(checkpoint_dir / ("sr_step_" + std::to_string(state.step) + ".ckpt"), state);
  }
  auto ckpt = save_sr_checkpoint(checkpoint_dir / "sr_final.ckpt", state);
  write_text_file(checkpoint_dir / "sr_loss_history.csv", format_sr_history_csv(state.history));
  return {std::move(state), std::move(ckpt)};
}

}  // namespace chairgan::superres
