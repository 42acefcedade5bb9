#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/synthesis/latent.hpp"

namespace chairgan::candidates {

inline constexpr const char* kManifestFile = "catalog.jsonl";
inline constexpr const char* kHeadFile = "catalog.json";
inline constexpr const char* kCatalogFormat = "chairgan.catalog.v1";

struct CandidateRecord {
  std::string id;
  synthesis::LatentVector latent;
  /// Seed of the sample_latent call and position within it; no seed for
  /// latents supplied directly (interpolation frames promoted to the catalog).
  std::optional<std::uint64_t> seed;
  std::uint64_t index = 0;
  /// Relative to the catalog directory.
  std::string lr_path;
  std::string sr_path;
  std::string lr_sha256;
  std::string sr_sha256;
  int lr_size = 0;
  int sr_size = 0;
  std::string gen_checkpoint_hash;
  std::string sr_checkpoint_hash;
  std::string created_at;

  friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

inline void to_json(nlohmann::json& j, const CandidateRecord& r) {
  j = nlohmann::json::object();
  j["id"] = r.id;
  j["latent"] = r.latent.values;
  j["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
  j["index"] = r.index;
  j["lr_path"] = r.lr_path;
  j["sr_path"] = r.sr_path;
  j["lr_sha256"] = r.lr_sha256;
  j["sr_sha256"] = r.sr_sha256;
  j["lr_size"] = r.lr_size;
  j["sr_size"] = r.sr_size;
  j["gen_checkpoint_hash"] = r.gen_checkpoint_hash;
  j["sr_checkpoint_hash"] = r.sr_checkpoint_hash;
  j["created_at"] = r.created_at;
}

inline void from_json(const nlohmann::json& j, CandidateRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.latent.values = j.at("latent").get<std::vector<double>>();
  r.seed = j.at("seed").is_null() ? std::nullopt : std::optional<std::uint64_t>(j.at("seed").get<std::uint64_t>());
  r.index = j.at("index").get<std::uint64_t>();
  r.lr_path = j.at("lr_path").get<std::string>();
  r.sr_path = j.at("sr_path").get<std::string>();
  r.lr_sha256 = j.at("lr_sha256").get<std::string>();
  r.sr_sha256 = j.at("sr_sha256").get<std::string>();
  r.lr_size = j.at("lr_size").get<int>();
  r.sr_size = j.at("sr_size").get<int>();
  r.gen_checkpoint_hash = j.at("gen_checkpoint_hash").get<std::string>();
  r.sr_checkpoint_hash = j.at("sr_checkpoint_hash").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
}

/// One manifest line, without trailing newline.
inline std::string manifest_line(const CandidateRecord& r) { return nlohmann::json(r).dump(); }

inline std::string candidate_id(std::uint64_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "c%06llu", static_cast<unsigned long long>(ordinal));
  return buf;
}

class CandidateCatalog {
 public:
  CandidateCatalog() = default;
  CandidateCatalog(std::filesystem::path dir, nlohmann::json head) : dir_(std::move(dir)), head_(std::move(head)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path manifest_path() const { return dir_ / kManifestFile; }
  const nlohmann::json& head() const { return head_; }
  nlohmann::json& head() { return head_; }
  const std::vector<CandidateRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  const CandidateRecord* find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }
  const CandidateRecord& at(const std::string& id) const {
    const auto* r = find(id);
    if (!r) throw NotFound("unknown candidate id " + id);
    return *r;
  }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  void add(CandidateRecord r) {
    if (contains(r.id)) throw InvalidArgument("duplicate candidate id " + r.id);
    index_.emplace(r.id, records_.size());
    records_.push_back(std::move(r));
  }

  std::filesystem::path lr_file(const CandidateRecord& r) const { return dir_ / r.lr_path; }
  std::filesystem::path sr_file(const CandidateRecord& r) const { return dir_ / r.sr_path; }

 private:
  std::filesystem::path dir_;
  nlohmann::json head_;
  std::vector<CandidateRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Rewrites the head file from the catalog's current state.
inline void write_head(CandidateCatalog& catalog) {
  catalog.head()["format"] = kCatalogFormat;
  catalog.head()["count"] = catalog.size();
  catalog.head()["manifest"] = kManifestFile;
  write_text_file(catalog.dir() / kHeadFile, catalog.head().dump(2) + "\n");
}

/// Appends records to the manifest (single writer) and updates the head.
inline void append_records(CandidateCatalog& catalog, const std::vector<CandidateRecord>& records) {
  for (const auto& r : records)
    if (catalog.contains(r.id)) throw InvalidArgument("duplicate candidate id " + r.id);
  {
    std::ofstream out(catalog.manifest_path(), std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + catalog.manifest_path().string());
    for (const auto& r : records) out << manifest_line(r) << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + catalog.manifest_path().string());
  }
  for (const auto& r : records) catalog.add(r);
  write_head(catalog);
}

/// Streams the manifest line by line. A line that is not a valid record,
/// or repeats an id, raises CorruptManifest with its line number.
inline CandidateCatalog load_catalog(const std::filesystem::path& dir) {
  nlohmann::json head;
  try {
    head = nlohmann::json::parse(read_text_file(dir / kHeadFile));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptManifest(0, std::string("catalog head: ") + e.what());
  }
  if (head.value("format", "") != kCatalogFormat) throw CorruptManifest(0, "catalog head has an unknown format");
  CandidateCatalog catalog(dir, head);
  std::ifstream in(dir / kManifestFile, std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / kManifestFile).string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    CandidateRecord r;
    try {
      r = nlohmann::json::parse(line).get<CandidateRecord>();
    } catch (const nlohmann::json::exception& e) {
      throw CorruptManifest(n, e.what());
    }
    if (catalog.contains(r.id)) throw CorruptManifest(n, "duplicate id " + r.id);
    catalog.add(std::move(r));
  }
  return catalog;
}

struct IntegrityIssue {
  std::string id;
  std::string file;
  std::string problem;
};

/// Re-hashes every referenced image. Empty result means the catalog is intact.
inline std::vector<IntegrityIssue> verify_catalog(const CandidateCatalog& catalog) {
  std::vector<IntegrityIssue> issues;
  auto check = [&](const CandidateRecord& r, const std::string& rel, const std::string& expected) {
    const auto path = catalog.dir() / rel;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
      issues.push_back({r.id, rel, "missing"});
      return;
    }
    if (file_sha256(path) != expected) issues.push_back({r.id, rel, "hash mismatch"});
  };
  for (const auto& r : catalog.records()) {
    check(r, r.lr_path, r.lr_sha256);
    check(r, r.sr_path, r.sr_sha256);
  }
  return issues;
}

}  // namespace chairgan::candidates
