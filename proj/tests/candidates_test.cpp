#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "chairgan/candidates/catalog.hpp"
#include "chairgan/candidates/generate.hpp"
#include "chairgan/candidates/navigation.hpp"
#include "chairgan/candidates/selection.hpp"
#include "chairgan/superres/trainer.hpp"
#include "chairgan/synthesis/trainer.hpp"
#include "support.hpp"

using namespace chairgan;
using namespace chairgan::candidates;
using testing_support::TempDir;

namespace {

/// Untrained but fully valid checkpoints for the chain.
void write_tiny_checkpoints(const std::filesystem::path& dir, int stages, int base_resolution) {
  synthesis::SynthesisConfig sc;
  sc.generator = synthesis::GeneratorConfig{100, stages, 2, base_resolution, true, 3};
  sc.discriminator = synthesis::DiscriminatorConfig{stages, 2, 0.2, true};
  sc.seed = 1;
  auto gs = synthesis::init_train_state<float>(sc);
  synthesis::save_checkpoint(dir / "gen.ckpt", gs);
  superres::SRConfig rc = superres::SRConfig::desk();
  rc.generator = {4, 1};
  rc.seed = 2;
  auto ss = superres::init_sr_state<float>(rc);
  superres::save_sr_checkpoint(dir / "sr.ckpt", ss);
}

ModelPair tiny_models(const std::filesystem::path& dir, int stages = 1, int base_resolution = 4) {
  write_tiny_checkpoints(dir, stages, base_resolution);
  return load_models(dir / "gen.ckpt", dir / "sr.ckpt");
}

LatentVector vec(std::vector<double> v) { return LatentVector(std::move(v)); }

double norm(const LatentVector& z) {
  double s = 0;
  for (double v : z.values) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST(Catalog, GenerationIsDeterministicAndBatchIndependent) {
  TempDir dir("cat_det");
  auto models = tiny_models(dir.path());
  GenerateOptions opts;
  opts.count = 10;
  opts.seed = 5;
  opts.batch_size = 4;
  const auto a = generate_candidates(models, dir / "a", opts);
  const auto b = generate_candidates(models, dir / "b", opts);
  opts.batch_size = 16;
  generate_candidates(models, dir / "c", opts);
  ASSERT_EQ(a.size(), 10u);
  const auto bytes = read_file_bytes(dir / "a" / kManifestFile);
  EXPECT_EQ(bytes, read_file_bytes(dir / "b" / kManifestFile));
  EXPECT_EQ(bytes, read_file_bytes(dir / "c" / kManifestFile));
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(a.records()[i].id, candidate_id(i));
    EXPECT_EQ(a.records()[i].index, i);
    EXPECT_EQ(a.records()[i].seed, std::optional<std::uint64_t>(5));
    EXPECT_EQ(a.records()[i].latent, synthesis::sample_latent(10, 5)[i]);
  }
  EXPECT_EQ(b.records(), a.records());
  EXPECT_THROW(generate_candidates(models, dir / "a", opts), IoError);
}

TEST(Catalog, LoadMatchesGenerated) {
  TempDir dir("cat_load");
  auto models = tiny_models(dir.path());
  GenerateOptions opts;
  opts.count = 3;
  const auto made = generate_candidates(models, dir / "cat", opts);
  const auto loaded = load_catalog(dir / "cat");
  EXPECT_EQ(loaded.records(), made.records());
  EXPECT_EQ(loaded.head()["count"], 3);
  EXPECT_TRUE(verify_catalog(loaded).empty());
  EXPECT_THROW(loaded.at("c999999"), NotFound);
}

TEST(Catalog, ResolutionChain64To256) {
  TempDir dir("cat_256");
  auto models = tiny_models(dir.path(), 4, 4);
  GenerateOptions opts;
  opts.count = 2;
  const auto cat = generate_candidates(models, dir / "cat", opts);
  for (const auto& r : cat.records()) {
    EXPECT_EQ(r.latent.dim(), 100u);
    EXPECT_EQ(r.lr_size, 64);
    EXPECT_EQ(r.sr_size, 256);
    const auto sr = read_image(cat.sr_file(r));
    EXPECT_EQ(sr.width, 256);
    EXPECT_EQ(sr.height, 256);
  }
}

TEST(Catalog, RegenerateIsBitExact) {
  TempDir dir("cat_regen");
  auto models = tiny_models(dir.path());
  GenerateOptions opts;
  opts.count = 4;
  const auto cat = generate_candidates(models, dir / "cat", opts);
  for (const auto& r : cat.records()) {
    const auto again = regenerate(models, r);
    EXPECT_EQ(sha256_hex(encode_png(again.sr)), r.sr_sha256);
    EXPECT_EQ(sha256_hex(encode_png(again.lr)), r.lr_sha256);
  }
  auto foreign = cat.records().front();
  foreign.gen_checkpoint_hash = "00";
  EXPECT_THROW(regenerate(models, foreign), CheckpointError);
}

TEST(Catalog, VerifyFindsTamperedAndMissingFiles) {
  TempDir dir("cat_verify");
  auto models = tiny_models(dir.path());
  GenerateOptions opts;
  opts.count = 3;
  const auto cat = generate_candidates(models, dir / "cat", opts);
  const auto& r0 = cat.records()[0];
  auto bytes = read_file_bytes(cat.sr_file(r0));
  bytes.back() ^= 0xff;
  write_file_bytes(cat.sr_file(r0), bytes);
  std::filesystem::remove(cat.lr_file(cat.records()[2]));
  const auto issues = verify_catalog(cat);
  ASSERT_EQ(issues.size(), 2u);
  EXPECT_EQ(issues[0].id, r0.id);
  EXPECT_EQ(issues[0].problem, "hash mismatch");
  EXPECT_EQ(issues[1].problem, "missing");
}

TEST(Catalog, CorruptLineReportsLineNumber) {
  TempDir dir("cat_corrupt");
  auto models = tiny_models(dir.path());
  GenerateOptions opts;
  opts.count = 4;
  generate_candidates(models, dir / "cat", opts);
  const auto path = dir / "cat" / kManifestFile;
  const auto text = read_text_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1) lines.push_back(text.substr(start, nl - start));
  ASSERT_EQ(lines.size(), 4u);

  write_text_file(path, lines[0] + "\n" + lines[1] + "\n{\"id\": truncated\n" + lines[3] + "\n");
  try {
    load_catalog(dir / "cat");
    FAIL() << "expected CorruptManifest";
  } catch (const CorruptManifest& e) {
    EXPECT_EQ(e.line(), 3u);
  }

  write_text_file(path, lines[0] + "\n" + lines[0] + "\n");
  try {
    load_catalog(dir / "cat");
    FAIL() << "expected CorruptManifest";
  } catch (const CorruptManifest& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Grid, SheetGeometry) {
  const auto g = grid_geometry(6, 3, 256);
  EXPECT_EQ(g.width(), 796);
  EXPECT_EQ(g.rows, 2);
  EXPECT_EQ(grid_geometry(1, 3, 256).rows, 1);
  EXPECT_EQ(grid_geometry(7, 3, 256).rows, 3);
  EXPECT_THROW(grid_geometry(0, 3, 256), InvalidArgument);
  EXPECT_THROW(grid_geometry(2, 0, 256), InvalidArgument);
}

TEST(Grid, TilesPlacedRowMajor) {
  TempDir dir("grid");
  auto models = tiny_models(dir.path());
  GenerateOptions opts;
  opts.count = 6;
  const auto cat = generate_candidates(models, dir / "cat", opts);
  std::vector<std::string> ids;
  for (const auto& r : cat.records()) ids.push_back(r.id);
  const auto sheet = export_grid(cat, ids, 3);
  const int tile = cat.records()[0].sr_size;
  const auto g = grid_geometry(6, 3, tile);
  ASSERT_EQ(sheet.width, g.width());
  ASSERT_EQ(sheet.height, g.height());
  for (int i = 0; i < 6; ++i) {
    const auto img = read_image(cat.sr_file(cat.records()[static_cast<std::size_t>(i)]));
    for (int y = 0; y < tile; ++y)
      for (int x = 0; x < tile; ++x)
        for (int c = 0; c < 3; ++c) ASSERT_EQ(sheet.at(g.x(i % 3) + x, g.y(i / 3) + y)[c], img.at(x, y)[c]);
  }
  EXPECT_EQ(sheet.at(0, 0)[0], 255);

  const auto single = export_grid(cat, {ids[0]}, 3);
  EXPECT_EQ(single.width, grid_geometry(1, 3, tile).width());
  EXPECT_THROW(export_grid(cat, {"nope"}, 3), NotFound);
  EXPECT_THROW(export_grid(cat, {}, 3), InvalidArgument);
}

TEST(Interpolation, EndpointsExact) {
  const auto zs = synthesis::sample_latent(2, 3);
  for (auto mode : {InterpMode::Linear, InterpMode::Spherical})
    for (int steps : {2, 3, 9}) {
      const auto path = interpolate_latents(zs[0], zs[1], steps, mode);
      ASSERT_EQ(path.size(), static_cast<std::size_t>(steps));
      EXPECT_EQ(path.front(), zs[0]);
      EXPECT_EQ(path.back(), zs[1]);
      for (const auto& z : path) EXPECT_TRUE(z.in_cube());
    }
  EXPECT_THROW(interpolate_latents(zs[0], zs[1], 1), InvalidArgument);
  EXPECT_THROW(interpolate_latents(zs[0], vec({0.1}), 3), ShapeError);
}

TEST(Interpolation, SlerpKeepsNormOfEqualNormEndpoints) {
  const auto a = vec({0.6, 0.0, -0.3, 0.2});
  // Same norm, different direction.
  const auto b = vec({0.0, 0.2, 0.6, -0.3});
  ASSERT_NEAR(norm(a), norm(b), 1e-15);
  for (const auto& z : interpolate_unclamped(a, b, 11, InterpMode::Spherical)) EXPECT_NEAR(norm(z), norm(a), 1e-9);
}

TEST(Interpolation, LinearMidpointOfOppositesIsZero) {
  const auto z = synthesis::sample_latent(1, 8).front();
  LatentVector neg = z;
  for (auto& v : neg.values) v = -v;
  const auto linear = interpolate_latents(z, neg, 3, InterpMode::Linear);
  for (double v : linear[1].values) EXPECT_EQ(v, 0.0);
  // Antiparallel endpoints have no unique great circle; spherical mode falls back to linear.
  const auto spherical = interpolate_latents(z, neg, 3, InterpMode::Spherical);
  for (double v : spherical[1].values) EXPECT_EQ(v, 0.0);
}

TEST(Interpolation, ModeParsing) {
  EXPECT_EQ(parse_interp_mode("linear"), InterpMode::Linear);
  EXPECT_EQ(parse_interp_mode("slerp"), InterpMode::Spherical);
  EXPECT_THROW(parse_interp_mode("cubic"), InvalidArgument);
}

TEST(Neighborhood, StaysWithinRadiusAndCube) {
  const auto c = synthesis::sample_latent(1, 2).front();
  const auto ns = neighborhood_samples(c, 0.1, 50, 4);
  ASSERT_EQ(ns.size(), 50u);
  for (const auto& z : ns) {
    ASSERT_TRUE(z.in_cube());
    for (std::size_t k = 0; k < c.dim(); ++k) ASSERT_LE(std::abs(z[k] - c[k]), 0.1 + 1e-15);
  }
  EXPECT_EQ(ns, neighborhood_samples(c, 0.1, 50, 4));
  EXPECT_NE(ns, neighborhood_samples(c, 0.1, 50, 5));
  EXPECT_THROW(neighborhood_samples(c, 0.0, 1, 1), InvalidArgument);
  EXPECT_THROW(neighborhood_samples(c, 0.1, 0, 1), InvalidArgument);
}

namespace {

SelectionStore make_store(const std::filesystem::path& dir) {
  return SelectionStore(dir, [](const std::string& id) { return id.size() == 7 && id[0] == 'c'; });
}

}  // namespace

TEST(Selection, FreshSetIsEmptyAtRevisionZero) {
  TempDir dir("sel0");
  auto store = make_store(dir.path());
  const auto s = store.get("shortlist");
  EXPECT_EQ(s.revision, 0u);
  EXPECT_TRUE(s.items.empty());
}

TEST(Selection, EachWriteBumpsRevisionByOne) {
  TempDir dir("sel1");
  auto store = make_store(dir.path());
  const auto r1 = store.replace("s", 0, {{"c000001", 3, "nice"}});
  EXPECT_EQ(r1.revision, 1u);
  const auto r2 = store.replace("s", 1, {{"c000001", 5, ""}, {"c000002", 0, ""}});
  EXPECT_EQ(r2.revision, 2u);
  EXPECT_EQ(store.get("s"), r2);
  auto reopened = make_store(dir.path());
  EXPECT_EQ(reopened.get("s"), r2);
  EXPECT_THROW(store.replace("s", 1, {}), RevisionConflict);
  EXPECT_EQ(store.get("s").revision, 2u);
}

TEST(Selection, RejectsBadInput) {
  TempDir dir("sel2");
  auto store = make_store(dir.path());
  EXPECT_THROW(store.replace("s", 0, {{"unknown", 1, ""}}), NotFound);
  EXPECT_THROW(store.replace("s", 0, {{"c000001", 6, ""}}), InvalidArgument);
  EXPECT_THROW(store.replace("s", 0, {{"c000001", 1, ""}, {"c000001", 2, ""}}), InvalidArgument);
  EXPECT_THROW(store.get("../etc"), InvalidArgument);
  EXPECT_THROW(store.get(""), InvalidArgument);
  EXPECT_EQ(store.get("s").revision, 0u);
}

TEST(Selection, ConcurrentWritersAtSameRevision) {
  TempDir dir("sel3");
  auto store = make_store(dir.path());
  for (int round = 0; round < 20; ++round) {
    const auto rev = store.get("race").revision;
    std::atomic<int> ok{0}, conflict{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
      threads.emplace_back([&, t] {
        try {
          store.replace("race", rev, {{"c00000" + std::to_string(t), t, ""}});
          ++ok;
        } catch (const RevisionConflict&) {
          ++conflict;
        }
      });
    for (auto& th : threads) th.join();
    EXPECT_EQ(ok.load(), 1);
    EXPECT_EQ(conflict.load(), 3);
    EXPECT_EQ(store.get("race").revision, rev + 1);
  }
}
