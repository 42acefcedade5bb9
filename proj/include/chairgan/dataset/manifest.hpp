#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/core/image.hpp"

namespace chairgan::dataset {

struct ImageRecord {
  std::string id;
  std::string path;
  int width = 0;
  int height = 0;
  int channels = 3;
  std::string sha256;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct DatasetManifest {
  std::string directory;
  int target_resolution = 0;
  std::uint64_t seed = 0;
  std::vector<ImageRecord> records;
  std::vector<std::string> train;
  std::vector<std::string> holdout;
  /// Files with an image extension that could not be decoded.
  std::size_t skipped = 0;

  const ImageRecord& record(const std::string& id) const {
    for (const auto& r : records)
      if (r.id == id) return r;
    throw NotFound("manifest has no record " + id);
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline void to_json(nlohmann::json& j, const ImageRecord& r) {
  j = {{"id", r.id}, {"path", r.path}, {"width", r.width}, {"height", r.height}, {"channels", r.channels}, {"sha256", r.sha256}};
}

inline void from_json(const nlohmann::json& j, ImageRecord& r) {
  j.at("id").get_to(r.id);
  j.at("path").get_to(r.path);
  j.at("width").get_to(r.width);
  j.at("height").get_to(r.height);
  j.at("channels").get_to(r.channels);
  j.at("sha256").get_to(r.sha256);
}

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = {{"format", "chairgan.dataset.v1"},
       {"directory", m.directory},
       {"target_resolution", m.target_resolution},
       {"seed", m.seed},
       {"records", m.records},
       {"split", {{"train", m.train}, {"holdout", m.holdout}}},
       {"skipped", m.skipped}};
}

inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
  j.at("directory").get_to(m.directory);
  j.at("target_resolution").get_to(m.target_resolution);
  j.at("seed").get_to(m.seed);
  j.at("records").get_to(m.records);
  j.at("split").at("train").get_to(m.train);
  j.at("split").at("holdout").get_to(m.holdout);
  m.skipped = j.value("skipped", std::size_t{0});
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_text_file(path, nlohmann::json(m).dump(2) + "\n");
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path)).get<DatasetManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed dataset manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace chairgan::dataset
