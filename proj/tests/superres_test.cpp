#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "chairgan/core/resample.hpp"
#include "chairgan/dataset/pairs.hpp"
#include "chairgan/dataset/synth_corpus.hpp"
#include "chairgan/superres/evaluate.hpp"
#include "chairgan/superres/extractor.hpp"
#include "chairgan/superres/losses.hpp"
#include "chairgan/superres/network.hpp"
#include "chairgan/superres/trainer.hpp"
#include "support.hpp"

using namespace chairgan;
using namespace chairgan::superres;
using testing_support::TempDir;

namespace {

double oracle_content(const FeatureMap& a, const FeatureMap& b) {
  double acc = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) acc += (a.at(c, y, x) - b.at(c, y, x)) * (a.at(c, y, x) - b.at(c, y, x));
  return acc / (a.width * a.height);
}

SRConfig tiny_sr_config() {
  SRConfig c = SRConfig::desk();
  c.generator = {4, 1};
  c.extractor.convs_per_block = {1, 1};
  c.extractor.block_channels = {4, 4};
  c.content_layer = {2, 1, false};
  c.discriminator = {2, 2, 0.2};
  c.batch_size = 2;
  c.patch_size = 4;
  c.content_only_steps = 3;
  c.adversarial_steps = 0;
  return c;
}

std::vector<dataset::ResolutionPair> random_pairs(std::size_t n, int lr_side, std::uint64_t seed) {
  Rng r(seed);
  std::vector<dataset::ResolutionPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    NormalizedImage hr(3, lr_side * 4, lr_side * 4);
    for (auto& v : hr.data) v = static_cast<float>(r.uniform(-0.8, 0.8));
    out.push_back({hr, downscale(hr, 4), "p" + std::to_string(i)});
  }
  return out;
}

}  // namespace

TEST(ContentLoss, WorkedExample) {
  FeatureMap a(1, 2, 2), b(1, 2, 2);
  b.data = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(perceptual_content_loss(a, b), 7.5);
}

TEST(ContentLoss, ConstantOffsetScalesWithChannels) {
  // Normalisation is by W*H only, so a constant offset c gives C * c^2.
  for (int ch : {1, 3, 8}) {
    FeatureMap a(ch, 5, 7, 0.25), b(ch, 5, 7, 0.25 + 0.3);
    EXPECT_NEAR(perceptual_content_loss(a, b), ch * 0.09, 1e-12);
  }
  EXPECT_THROW(perceptual_content_loss(FeatureMap(1, 2, 2), FeatureMap(2, 2, 2)), ShapeError);
}

TEST(ContentLoss, MatchesBruteForceOnRandomInputs) {
  Rng r(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 1 + static_cast<int>(r.below(6)), h = 1 + static_cast<int>(r.below(9)), w = 1 + static_cast<int>(r.below(9));
    FeatureMap a(c, h, w), b(c, h, w);
    for (auto& v : a.data) v = r.normal(0, 2);
    for (auto& v : b.data) v = r.normal(0, 2);
    const double o = oracle_content(a, b);
    ASSERT_LE(std::abs(perceptual_content_loss(a, b) - o), 1e-6 * o);
  }
}

TEST(ContentLoss, BatchIsMeanOfSamples) {
  Rng r(2);
  Tensor<double> a(3, 2, 4, 5), b(3, 2, 4, 5);
  for (auto& v : a.values()) v = r.normal();
  for (auto& v : b.values()) v = r.normal();
  double mean = 0;
  for (int i = 0; i < 3; ++i) mean += perceptual_content_loss(feature_map(a, i), feature_map(b, i)) / 3;
  EXPECT_NEAR(perceptual_content_loss(a, b), mean, 1e-12);
}

TEST(SrLosses, WorkedExamples) {
  const std::vector<double> half{0.5, 0.5};
  EXPECT_NEAR(sr_losses(half, half, 0.0, 1e-3).loss_d_sr, 2 * std::numbers::ln2, 1e-12);
  const std::vector<double> q{0.25};
  EXPECT_NEAR(sr_losses(q, q, 7.5, 1e-3).loss_g_sr, 7.5 + 1e-3 * std::log(4.0), 1e-12);
  EXPECT_NEAR(sr_losses(q, q, 7.5, 1e-3).loss_g_sr, 7.50139, 5e-6);
}

TEST(SrLosses, ZeroWeightIsContentExactly) {
  Rng r(3);
  for (int i = 0; i < 50; ++i) {
    const double content = r.uniform(0, 10);
    const std::vector<double> p{r.uniform(0.01, 0.99), r.uniform(0.01, 0.99)};
    EXPECT_EQ(sr_losses(p, p, content, 0.0).loss_g_sr, content);
  }
}

TEST(Psnr, WorkedExamples) {
  NormalizedImage a(3, 4, 4, -1.0f), b(3, 4, 4, 0.0f), white(3, 4, 4, 1.0f);
  EXPECT_NEAR(psnr(a, b), 6.0206, 1e-4);
  EXPECT_NEAR(psnr(a, white), 0.0, 1e-12);
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  EXPECT_THROW(psnr(a, NormalizedImage(3, 4, 5)), ShapeError);
}

TEST(Upscale, ShapeDeterminismAndBatchIndependence) {
  auto state = init_sr_state<float>(SRConfig::desk());
  const auto pairs = random_pairs(3, 8, 1);
  std::vector<NormalizedImage> lrs;
  for (const auto& p : pairs) lrs.push_back(p.lr);
  const auto all = upscale(state.gen, lrs);
  ASSERT_EQ(all.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(all[i].height, 32);
    EXPECT_EQ(all[i].width, 32);
    EXPECT_TRUE(all[i].valid());
    EXPECT_EQ(upscale(state.gen, lrs[i]), all[i]);
  }
  EXPECT_EQ(upscale(state.gen, lrs), all);
}

TEST(Upscale, Lr64GivesSr256) {
  auto state = init_sr_state<float>(SRConfig::desk());
  const auto out = upscale(state.gen, NormalizedImage(3, 64, 64, 0.1f));
  EXPECT_EQ(out.height, 256);
  EXPECT_EQ(out.width, 256);
}

TEST(Gradients, ContentLossThroughSrGenerator) {
  SRConfig cfg = tiny_sr_config();
  SRTrainState<double> s(cfg);
  testing_support::randomize(s.gen.net().parameters(), 4, 0.15);
  const auto pairs = random_pairs(2, 3, 9);
  std::vector<NormalizedImage> lrs;
  for (const auto& p : pairs) {
    NormalizedImage lr = p.lr;
    for (auto& v : lr.data) v *= 0.3f / 0.8f;
    lrs.push_back(lr);
  }
  const auto lr = stack_images<double>(lrs);
  // Target close to the current output. The loss is quadratic in the feature
  // gap and its gradient linear, so a small gap keeps the differenced loss
  // well above double roundoff.
  Tensor<double> hr = s.gen.forward(lr, nn::Mode::Inference);
  Rng noise(10);
  for (auto& v : hr.values()) v += noise.uniform(-0.002, 0.002);
  const auto phi_hr = s.extractor.forward(hr, nn::Mode::Inference);
  auto loss = [&] { return perceptual_content_loss(phi_hr, s.extractor.forward(s.gen.forward(lr, nn::Mode::Train), nn::Mode::Train)); };

  s.gen.net().zero_grad();
  const auto sr = s.gen.forward(lr, nn::Mode::Train);
  for (double v : sr.values()) ASSERT_LT(std::abs(v), 0.99) << "output reached the clamp";
  const auto phi_sr = s.extractor.forward(sr, nn::Mode::Train);
  s.gen.backward(s.extractor.backward(perceptual_content_grad(phi_hr, phi_sr)));
  const auto res = testing_support::check_gradients(s.gen.net().parameters(), loss);
  EXPECT_LE(res.max_rel, 1e-5) << res.worst;
  EXPECT_GT(res.checked, 200u);
}

TEST(Extractor, FrozenDuringTraining) {
  TempDir dir("frozen");
  SRConfig cfg = tiny_sr_config();
  auto state = init_sr_state<float>(cfg);
  const auto before = state.extractor.fingerprint();
  const auto res = finetune_sr<float>(cfg, random_pairs(4, 8, 2), dir.path());
  EXPECT_EQ(res.state.step, 3u);
  auto after = res.state;
  EXPECT_EQ(after.extractor.fingerprint(), before);
}

TEST(Extractor, RejectsMissingLayers) {
  ExtractorConfig cfg;
  EXPECT_THROW(FeatureExtractor<float>(cfg, {3, 1, false}), ConfigError);
  EXPECT_THROW(FeatureExtractor<float>(cfg, {1, 3, false}), ConfigError);
  ExtractorConfig pre;
  pre.kind = "pretrained";
  EXPECT_THROW(FeatureExtractor<float>(pre, {1, 1, false}), ConfigError);
}

TEST(Finetune, ZeroStepsLeavesInitialWeights) {
  TempDir dir("zero_sr");
  SRConfig cfg = tiny_sr_config();
  cfg.content_only_steps = 0;
  cfg.adversarial_steps = 0;
  const auto res = finetune_sr<float>(cfg, random_pairs(2, 8, 3), dir.path());
  auto init = init_sr_state<float>(cfg);
  EXPECT_EQ(res.state.step, 0u);
  auto got = res.state;
  const auto a = got.gen.net().parameters(), b = init.gen.net().parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].param->value, b[i].param->value);
}

TEST(Finetune, ZeroWeightAdversarialPhaseMatchesContentOnly) {
  TempDir dir("w0");
  const auto pairs = random_pairs(4, 8, 5);
  SRConfig content = tiny_sr_config();
  content.content_only_steps = 4;
  SRConfig adv = content;
  adv.content_only_steps = 0;
  adv.adversarial_steps = 4;
  adv.adversarial_weight = 0.0;
  auto a = finetune_sr<float>(content, pairs, dir / "a").state;
  auto b = finetune_sr<float>(adv, pairs, dir / "b").state;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(b.history[i].phase, Phase::Adversarial);
    EXPECT_EQ(b.history[i].loss_g, b.history[i].content);
    EXPECT_EQ(a.history[i].content, b.history[i].content);
  }
  const auto pa = a.gen.net().parameters(), pb = b.gen.net().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].param->value, pb[i].param->value);
}

TEST(Finetune, PhaseSwitchesAfterContentSteps) {
  TempDir dir("phase");
  SRConfig cfg = tiny_sr_config();
  cfg.content_only_steps = 2;
  cfg.adversarial_steps = 2;
  const auto res = finetune_sr<float>(cfg, random_pairs(4, 8, 6), dir.path());
  ASSERT_EQ(res.state.history.size(), 4u);
  EXPECT_EQ(res.state.history[1].phase, Phase::ContentOnly);
  EXPECT_EQ(res.state.history[1].loss_d, 0.0);
  EXPECT_EQ(res.state.history[2].phase, Phase::Adversarial);
  EXPECT_GT(res.state.history[2].loss_d, 0.0);
}

TEST(Finetune, RejectsMismatchedPairs) {
  TempDir dir("badpairs");
  auto pairs = random_pairs(2, 8, 7);
  pairs[1].lr = NormalizedImage(3, 7, 8);
  EXPECT_THROW(finetune_sr<float>(tiny_sr_config(), pairs, dir.path()), ShapeError);
  EXPECT_THROW(finetune_sr<float>(tiny_sr_config(), {}, dir.path()), EmptyDataset);
}

TEST(Checkpoint, SrRoundTripAndResume) {
  TempDir dir("srckpt");
  const auto pairs = random_pairs(4, 8, 8);
  SRConfig cfg = tiny_sr_config();
  cfg.content_only_steps = 3;
  cfg.adversarial_steps = 3;
  cfg.checkpoint_every = 2;
  const auto straight = finetune_sr<float>(cfg, pairs, dir / "s");
  auto loaded = load_sr_checkpoint<float>(dir / "s" / "sr_final.ckpt");
  save_sr_checkpoint(dir / "again.ckpt", loaded);
  EXPECT_EQ(read_file_bytes(dir / "s" / "sr_final.ckpt"), read_file_bytes(dir / "again.ckpt"));
  EXPECT_EQ(loaded.history, straight.state.history);

  for (const char* mid : {"sr_step_2.ckpt", "sr_step_4.ckpt"}) {
    FinetuneOptions opts;
    opts.resume_from = dir / "s" / mid;
    const auto resumed = finetune_sr<float>(cfg, pairs, dir / "r", opts);
    EXPECT_EQ(resumed.state.history, straight.state.history) << mid;
    EXPECT_EQ(read_file_bytes(dir / "r" / "sr_final.ckpt"), read_file_bytes(dir / "s" / "sr_final.ckpt")) << mid;
  }
}

TEST(Checkpoint, GeneratorOnlyLoadMatchesFullState) {
  TempDir dir("srgen");
  const auto res = finetune_sr<float>(tiny_sr_config(), random_pairs(2, 8, 9), dir.path());
  auto gen = load_sr_generator<float>(dir / "sr_final.ckpt");
  auto full = res.state;
  const NormalizedImage lr(3, 8, 8, 0.2f);
  EXPECT_EQ(upscale(gen, lr), upscale(full.gen, lr));
}

TEST(Evaluate, NearestStubScoresAsNearest) {
  TempDir dir("eval");
  const auto m = dataset::synth_chair_corpus(6, 64, 3, dir.path());
  const auto pairs = dataset::make_sr_pairs(m, 64, 4).pairs;
  const auto rep = evaluate_sr([](const NormalizedImage& lr) { return upscale_nearest(lr, 4); }, pairs);
  ASSERT_EQ(rep.pairs.size(), 6u);
  EXPECT_EQ(rep.mean_model, rep.mean_nearest);
  EXPECT_GE(rep.mean_bicubic, rep.mean_nearest);
  const auto j = to_json(rep);
  EXPECT_EQ(j["pairs"].size(), 6u);
  EXPECT_THROW(evaluate_sr([](const NormalizedImage& lr) { return lr; }, {}), InvalidArgument);
}

TEST(Evaluate, PerfectModelIsInfinite) {
  const auto pairs = random_pairs(1, 4, 1);
  const auto hr = pairs[0].hr;
  const auto rep = evaluate_sr([&](const NormalizedImage&) { return hr; }, pairs);
  EXPECT_TRUE(std::isinf(rep.mean_model));
  EXPECT_EQ(to_json(rep)["mean"]["model"], "inf");
}
