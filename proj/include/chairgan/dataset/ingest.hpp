#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/core/image_io.hpp"
#include "chairgan/core/resample.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/dataset/manifest.hpp"

namespace chairgan::dataset {

inline constexpr int kMinImageSide = 8;
inline constexpr double kHoldoutFraction = 0.05;
inline constexpr std::uint64_t kSplitStream = 0x5350'4c49'54ull;  // "SPLIT"

/// Number of holdout records for a corpus of n (rounded 5%, at least one
/// once there are two records).
inline std::size_t holdout_count(std::size_t n) {
  if (n < 2) return 0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(kHoldoutFraction * static_cast<double>(n))));
}

/// Seeded train/holdout assignment over record indices. The shuffled prefix
/// becomes the holdout; both lists are returned in record order.
inline void assign_split(DatasetManifest& m) {
  std::vector<std::size_t> order(m.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(m.seed, kSplitStream));
  rng.shuffle(order);
  const std::size_t h = holdout_count(order.size());
  std::vector<bool> is_holdout(order.size(), false);
  for (std::size_t i = 0; i < h; ++i) is_holdout[order[i]] = true;
  m.train.clear();
  m.holdout.clear();
  for (std::size_t i = 0; i < m.records.size(); ++i)
    (is_holdout[i] ? m.holdout : m.train).push_back(m.records[i].id);
}

/// Scans a directory (non-recursive) for image files and builds a manifest.
/// Files are visited in lexicographic order; undecodable ones are counted in
/// `skipped` and left out.
inline DatasetManifest ingest_corpus(const std::filesystem::path& directory, int target_resolution, std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (target_resolution < kMinImageSide) throw InvalidArgument("ingest_corpus: target resolution below minimum");
  std::error_code ec;
  if (!fs::is_directory(directory, ec)) throw IoError("corpus directory not found: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });

  DatasetManifest m;
  m.directory = directory.string();
  m.target_resolution = target_resolution;
  m.seed = seed;
  for (const auto& f : files) {
    std::vector<std::uint8_t> bytes;
    RgbImage img;
    try {
      bytes = read_file_bytes(f);
      img = decode_image(bytes);
    } catch (const Error&) {
      ++m.skipped;
      continue;
    }
    if (img.width < kMinImageSide || img.height < kMinImageSide) {
      ++m.skipped;
      continue;
    }
    m.records.push_back({f.filename().string(), f.string(), img.width, img.height, 3, sha256_hex(bytes)});
  }
  if (m.records.empty()) throw CorpusEmpty("no decodable images in " + directory.string());
  assign_split(m);
  return m;
}

/// Decodes, maps bytes to 2p/255 - 1, resizes the shortest side to the
/// target and center-crops to a square.
inline NormalizedImage preprocess(const ImageRecord& record, int target_resolution) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(record.path);
  } catch (const IoError& e) {
    throw DecodeError(e.what());
  }
  if (!record.sha256.empty() && sha256_hex(bytes) != record.sha256)
    throw DecodeError("content hash mismatch for " + record.path);
  return resize_and_center_crop(normalize(decode_image(bytes)), target_resolution);
}

/// Preprocesses the given ids in order.
inline std::vector<NormalizedImage> load_images(const DatasetManifest& m, const std::vector<std::string>& ids,
                                                int target_resolution) {
  std::vector<NormalizedImage> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(preprocess(m.record(id), target_resolution));
  return out;
}

}  // namespace chairgan::dataset
