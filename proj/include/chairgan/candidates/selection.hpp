#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"

namespace chairgan::candidates {

struct SelectionItem {
  std::string id;
  int rating = 0;  // stars, 0..5
  std::string note;

  friend bool operator==(const SelectionItem&, const SelectionItem&) = default;
};

struct SelectionSet {
  std::string name;
  std::vector<SelectionItem> items;
  std::uint64_t revision = 0;

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& i : items) out.push_back(i.id);
    return out;
  }
  friend bool operator==(const SelectionSet&, const SelectionSet&) = default;
};

inline void to_json(nlohmann::json& j, const SelectionItem& i) {
  j = {{"id", i.id}, {"rating", i.rating}, {"note", i.note}};
}
inline void from_json(const nlohmann::json& j, SelectionItem& i) {
  i.id = j.at("id").get<std::string>();
  i.rating = j.value("rating", 0);
  i.note = j.value("note", std::string());
}
inline void to_json(nlohmann::json& j, const SelectionSet& s) {
  j = {{"name", s.name}, {"items", s.items}, {"revision", s.revision}};
}
inline void from_json(const nlohmann::json& j, SelectionSet& s) {
  s.name = j.at("name").get<std::string>();
  s.items = j.at("items").get<std::vector<SelectionItem>>();
  s.revision = j.at("revision").get<std::uint64_t>();
}

inline bool valid_selection_name(const std::string& name) {
  if (name.empty() || name.size() > 64) return false;
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  return true;
}

/// Named selection sets stored as `<dir>/<name>.json`. A set that was never
/// written reads as empty at revision 0. Each accepted mutation increments
/// the revision by exactly one; a stale expected revision is rejected.
class SelectionStore {
 public:
  using IdCheck = std::function<bool(const std::string&)>;

  SelectionStore(std::filesystem::path dir, IdCheck exists) : dir_(std::move(dir)), exists_(std::move(exists)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string());
  }

  SelectionSet get(const std::string& name) {
    check_name(name);
    std::lock_guard lock(mutex_for(name));
    return read(name);
  }

  SelectionSet replace(const std::string& name, std::uint64_t expected_revision, std::vector<SelectionItem> items) {
    check_name(name);
    for (const auto& i : items) {
      if (i.rating < 0 || i.rating > 5) throw InvalidArgument("rating must be in 0..5 for " + i.id);
      if (!exists_(i.id)) throw NotFound("unknown candidate id " + i.id);
    }
    for (std::size_t a = 0; a < items.size(); ++a)
      for (std::size_t b = a + 1; b < items.size(); ++b)
        if (items[a].id == items[b].id) throw InvalidArgument("duplicate id " + items[a].id + " in selection");
    std::lock_guard lock(mutex_for(name));
    SelectionSet cur = read(name);
    if (cur.revision != expected_revision)
      throw RevisionConflict("selection " + name + " is at revision " + std::to_string(cur.revision) + ", expected " +
                             std::to_string(expected_revision));
    cur.items = std::move(items);
    ++cur.revision;
    const auto path = file(name);
    const auto tmp = dir_ / ("." + name + ".json.tmp");
    write_text_file(tmp, nlohmann::json(cur).dump(2) + "\n");
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path.string());
    return cur;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  static void check_name(const std::string& name) {
    if (!valid_selection_name(name)) throw InvalidArgument("invalid selection name '" + name + "'");
  }

  std::filesystem::path file(const std::string& name) const { return dir_ / (name + ".json"); }

  SelectionSet read(const std::string& name) const {
    const auto path = file(name);
    if (!std::filesystem::exists(path)) return SelectionSet{name, {}, 0};
    try {
      return nlohmann::json::parse(read_text_file(path)).get<SelectionSet>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("selection file " + path.string() + " is malformed: " + e.what());
    }
  }

  std::mutex& mutex_for(const std::string& name) {
    std::lock_guard lock(map_mutex_);
    auto& m = mutexes_[name];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  std::filesystem::path dir_;
  IdCheck exists_;
  std::mutex map_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> mutexes_;
};

}  // namespace chairgan::candidates
