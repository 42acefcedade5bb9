#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/core/image_io.hpp"
#include "chairgan/core/resample.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/dataset/ingest.hpp"

namespace chairgan::dataset {

struct ResolutionPair {
  NormalizedImage hr;
  NormalizedImage lr;
  std::string source_id;
};

struct PairSet {
  std::vector<ResolutionPair> pairs;
  std::size_t skipped = 0;
};

inline PairSet make_sr_pairs(const DatasetManifest& manifest, int hr_resolution, int factor) {
  if (factor < 1 || hr_resolution % factor != 0)
    throw ShapeError("make_sr_pairs: resolution " + std::to_string(hr_resolution) + " not divisible by " +
                     std::to_string(factor));
  PairSet out;
  for (const auto& rec : manifest.records) {
    try {
      NormalizedImage hr = preprocess(rec, hr_resolution);
      NormalizedImage lr = downscale(hr, factor);
      out.pairs.push_back({std::move(hr), std::move(lr), rec.id});
    } catch (const DecodeError&) {
      ++out.skipped;
    }
  }
  return out;
}

/// Restricts a pair set to the given source ids, keeping pair order.
inline std::vector<ResolutionPair> select_pairs(const std::vector<ResolutionPair>& pairs,
                                                const std::vector<std::string>& ids) {
  std::vector<ResolutionPair> out;
  for (const auto& p : pairs)
    if (std::find(ids.begin(), ids.end(), p.source_id) != ids.end()) out.push_back(p);
  return out;
}

/// On-disk pair set: hr/lr PNGs plus an index JSON listing the split.
inline void save_pairs(const std::filesystem::path& dir, const PairSet& set, const DatasetManifest& manifest,
                       int factor) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "hr", ec);
  fs::create_directories(dir / "lr", ec);
  if (ec) throw IoError("cannot create pair directory " + dir.string());
  nlohmann::json index = {{"format", "chairgan.pairs.v1"}, {"factor", factor}, {"skipped", set.skipped}};
  nlohmann::json items = nlohmann::json::array();
  for (const auto& p : set.pairs) {
    const std::string stem = fs::path(p.source_id).stem().string();
    const std::string hr_rel = "hr/" + stem + ".png", lr_rel = "lr/" + stem + ".png";
    write_png(dir / hr_rel, to_rgb(p.hr));
    write_png(dir / lr_rel, to_rgb(p.lr));
    items.push_back({{"source_id", p.source_id}, {"hr", hr_rel}, {"lr", lr_rel}});
  }
  index["pairs"] = items;
  index["train"] = manifest.train;
  index["holdout"] = manifest.holdout;
  write_text_file(dir / "pairs.json", index.dump(2) + "\n");
}

struct LoadedPairs {
  std::vector<ResolutionPair> train;
  std::vector<ResolutionPair> holdout;
  int factor = 4;
};

inline LoadedPairs load_pairs(const std::filesystem::path& index_path) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_text_file(index_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed pair index " + index_path.string() + ": " + e.what());
  }
  const auto dir = index_path.parent_path();
  std::vector<ResolutionPair> all;
  for (const auto& item : index.at("pairs")) {
    all.push_back({normalize(read_image(dir / item.at("hr").get<std::string>())),
                   normalize(read_image(dir / item.at("lr").get<std::string>())), item.at("source_id").get<std::string>()});
  }
  LoadedPairs out;
  out.factor = index.value("factor", 4);
  out.train = select_pairs(all, index.value("train", std::vector<std::string>{}));
  out.holdout = select_pairs(all, index.value("holdout", std::vector<std::string>{}));
  return out;
}

}  // namespace chairgan::dataset
