#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/candidates/catalog.hpp"
#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/core/image.hpp"
#include "chairgan/core/image_io.hpp"
#include "chairgan/superres/network.hpp"
#include "chairgan/superres/trainer.hpp"
#include "chairgan/synthesis/latent.hpp"
#include "chairgan/synthesis/networks.hpp"
#include "chairgan/synthesis/trainer.hpp"

namespace chairgan::candidates {

/// The two inference networks of the chain plus the hashes of the
/// checkpoints they were read from.
struct ModelPair {
  synthesis::SynthesisConfig synthesis_config;
  synthesis::Generator<float> gen;
  superres::SRGenerator<float> sr;
  std::string gen_hash;
  std::string sr_hash;
};

inline ModelPair load_models(const std::filesystem::path& gen_ckpt, const std::filesystem::path& sr_ckpt) {
  auto state = synthesis::load_checkpoint<float>(gen_ckpt);
  auto sr = superres::load_sr_generator<float>(sr_ckpt);
  return ModelPair{state.config, std::move(state.gen), std::move(sr), synthesis::checkpoint_hash(gen_ckpt),
                   synthesis::checkpoint_hash(sr_ckpt)};
}

/// Raw sample and its x4 upscale. The super-resolution input is the
/// quantized raw sample, i.e. exactly what is stored as the lr image.
struct RenderedCandidate {
  RgbImage lr;
  RgbImage sr;
};

inline std::vector<RenderedCandidate> render(ModelPair& models, const std::vector<synthesis::LatentVector>& zs) {
  std::vector<RenderedCandidate> out;
  out.reserve(zs.size());
  for (const auto& img : synthesis::generate(models.gen, zs)) {
    RenderedCandidate c;
    c.lr = to_rgb(img);
    c.sr = to_rgb(superres::upscale(models.sr, normalize(c.lr)));
    out.push_back(std::move(c));
  }
  return out;
}

/// Renders and stores images for `zs`, returning records with ids starting
/// at `first_ordinal`. Does not touch the manifest.
inline std::vector<CandidateRecord> materialize(ModelPair& models, const std::filesystem::path& dir,
                                                const std::vector<synthesis::LatentVector>& zs,
                                                std::uint64_t first_ordinal, std::optional<std::uint64_t> seed,
                                                std::size_t batch_size, const std::string& created_at) {
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(dir / "lr", ec);
  std::filesystem::create_directories(dir / "sr", ec);
  if (ec) throw IoError("cannot create image directories under " + dir.string());
  std::vector<CandidateRecord> records;
  records.reserve(zs.size());
  for (std::size_t start = 0; start < zs.size(); start += batch_size) {
    const std::vector<synthesis::LatentVector> chunk(zs.begin() + static_cast<std::ptrdiff_t>(start),
                                                     zs.begin() + static_cast<std::ptrdiff_t>(std::min(zs.size(), start + batch_size)));
    const auto rendered = render(models, chunk);
    for (std::size_t k = 0; k < rendered.size(); ++k) {
      const std::size_t i = start + k;
      CandidateRecord r;
      r.id = candidate_id(first_ordinal + i);
      r.latent = zs[i];
      r.seed = seed;
      r.index = i;
      r.lr_path = "lr/" + r.id + ".png";
      r.sr_path = "sr/" + r.id + ".png";
      const auto lr_png = encode_png(rendered[k].lr);
      const auto sr_png = encode_png(rendered[k].sr);
      write_file_bytes(dir / r.lr_path, lr_png);
      write_file_bytes(dir / r.sr_path, sr_png);
      r.lr_sha256 = sha256_hex(lr_png);
      r.sr_sha256 = sha256_hex(sr_png);
      r.lr_size = rendered[k].lr.width;
      r.sr_size = rendered[k].sr.width;
      r.gen_checkpoint_hash = models.gen_hash;
      r.sr_checkpoint_hash = models.sr_hash;
      r.created_at = created_at;
      records.push_back(std::move(r));
    }
  }
  return records;
}

struct GenerateOptions {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 16;
  /// Stored verbatim in every record; fixed values keep manifests reproducible.
  std::string created_at = "1970-01-01T00:00:00Z";
};

inline void to_json(nlohmann::json& j, const GenerateOptions& g) {
  j = {{"count", g.count}, {"seed", g.seed}, {"batch_size", g.batch_size}, {"created_at", g.created_at}};
}
inline void from_json(const nlohmann::json& j, GenerateOptions& g) {
  g.count = j.value("count", g.count);
  g.seed = j.value("seed", g.seed);
  g.batch_size = j.value("batch_size", g.batch_size);
  g.created_at = j.value("created_at", g.created_at);
}

/// Fresh catalog in out_dir from sample_latent(count, seed). On an I/O
/// failure the head is written with `partial: true` before rethrowing.
inline CandidateCatalog generate_candidates(ModelPair& models, const std::filesystem::path& out_dir,
                                            const GenerateOptions& opts) {
  if (opts.count < 1) throw InvalidArgument("generate_candidates: count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());
  if (std::filesystem::exists(out_dir / kManifestFile)) throw IoError(out_dir.string() + " already holds a catalog");

  nlohmann::json head = {{"format", kCatalogFormat},
                         {"synthesis_config", models.synthesis_config},
                         {"sr_config", models.sr.config()},
                         {"gen_checkpoint_hash", models.gen_hash},
                         {"sr_checkpoint_hash", models.sr_hash},
                         {"seed", opts.seed},
                         {"requested", opts.count},
                         {"batch_size", opts.batch_size},
                         {"partial", false}};
  CandidateCatalog catalog(out_dir, head);
  write_text_file(out_dir / kManifestFile, "");
  const auto zs = synthesis::sample_latent(opts.count, opts.seed, models.gen.config().latent_dim);
  try {
    for (std::size_t start = 0; start < zs.size(); start += opts.batch_size) {
      const std::size_t end = std::min(zs.size(), start + opts.batch_size);
      const std::vector<synthesis::LatentVector> chunk(zs.begin() + static_cast<std::ptrdiff_t>(start),
                                                       zs.begin() + static_cast<std::ptrdiff_t>(end));
      auto recs = materialize(models, out_dir, chunk, start, opts.seed, opts.batch_size, opts.created_at);
      for (std::size_t k = 0; k < recs.size(); ++k) recs[k].index = start + k;
      append_records(catalog, recs);
    }
  } catch (const IoError&) {
    catalog.head()["partial"] = true;
    try {
      write_head(catalog);
    } catch (const IoError&) {
    }
    throw;
  }
  return catalog;
}

/// Re-runs the chain from a record's stored latent. Checkpoint hashes must
/// match the models, otherwise CheckpointError.
inline RenderedCandidate regenerate(ModelPair& models, const CandidateRecord& record) {
  if (record.gen_checkpoint_hash != models.gen_hash || record.sr_checkpoint_hash != models.sr_hash)
    throw CheckpointError("candidate " + record.id + " was produced by different checkpoints");
  return render(models, {record.latent}).front();
}

inline constexpr int kGridPad = 4;

struct GridGeometry {
  int tile = 0;
  int columns = 0;
  int rows = 0;
  int pad = kGridPad;

  int width() const { return pad + columns * (tile + 2 * pad); }
  int height() const { return pad + rows * (tile + 2 * pad); }
  int x(int col) const { return pad / 2 + col * (tile + 2 * pad) + pad; }
  int y(int row) const { return pad / 2 + row * (tile + 2 * pad) + pad; }
};

inline GridGeometry grid_geometry(std::size_t count, int columns, int tile, int pad = kGridPad) {
  if (count < 1) throw InvalidArgument("grid: no ids");
  if (columns < 1) throw InvalidArgument("grid: columns must be >= 1");
  const auto c = static_cast<std::size_t>(columns);
  return {tile, columns, static_cast<int>((count + c - 1) / c), pad};
}

/// Row-major sheet of sr images on a white background.
inline RgbImage export_grid(const CandidateCatalog& catalog, const std::vector<std::string>& ids, int columns,
                            int pad = kGridPad) {
  if (ids.empty()) throw InvalidArgument("grid: no ids");
  std::vector<RgbImage> tiles;
  for (const auto& id : ids) tiles.push_back(read_image(catalog.sr_file(catalog.at(id))));
  const int tile = tiles.front().width;
  for (const auto& t : tiles)
    if (t.width != tile || t.height != tile) throw ShapeError("grid: sr images differ in size");
  const auto g = grid_geometry(ids.size(), columns, tile, pad);
  RgbImage sheet(g.width(), g.height(), 255);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const int col = static_cast<int>(i) % columns, row = static_cast<int>(i) / columns;
    for (int y = 0; y < tile; ++y)
      std::copy_n(tiles[i].at(0, y), static_cast<std::size_t>(tile) * 3, sheet.at(g.x(col), g.y(row) + y));
  }
  return sheet;
}

}  // namespace chairgan::candidates
