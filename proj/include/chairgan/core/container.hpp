#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"

namespace chairgan {

static_assert(std::endian::native == std::endian::little, "container encoding assumes a little-endian host");

/// Versioned binary container: a JSON header followed by named binary
/// sections, closed by a SHA-256 of everything before it.
///
/// Layout:
///   "CHGNCKPT" | u32 version | u32 kind_len | kind | u64 header_len | header
///   | u32 section_count | { u32 name_len | name | u64 len | bytes }* | sha256
struct Container {
  static constexpr char kMagic[8] = {'C', 'H', 'G', 'N', 'C', 'K', 'P', 'T'};
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> sections;

  void add(std::string name, std::vector<std::uint8_t> bytes) { sections.emplace_back(std::move(name), std::move(bytes)); }

  const std::vector<std::uint8_t>* find(const std::string& name) const {
    for (const auto& [n, b] : sections)
      if (n == name) return &b;
    return nullptr;
  }

  const std::vector<std::uint8_t>& at(const std::string& name) const {
    if (const auto* b = find(name)) return *b;
    throw CheckpointError("checkpoint section missing: " + name);
  }
};

template <typename T>
std::vector<std::uint8_t> pack_values(std::span<const T> values) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::vector<std::uint8_t> out(values.size_bytes());
  if (!values.empty()) std::memcpy(out.data(), values.data(), values.size_bytes());
  return out;
}

template <typename T>
std::vector<T> unpack_values(std::span<const std::uint8_t> bytes) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (bytes.size() % sizeof(T) != 0) throw CheckpointError("section size is not a multiple of the element size");
  std::vector<T> out(bytes.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

namespace detail {

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  std::uint8_t buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

inline void put_bytes(std::vector<std::uint8_t>& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_container(const Container& c) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(Container::kMagic), std::end(Container::kMagic));
  detail::put<std::uint32_t>(out, Container::kVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.kind.size()));
  detail::put_bytes(out, c.kind);
  const std::string header = c.header.dump();
  detail::put<std::uint64_t>(out, header.size());
  detail::put_bytes(out, header);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.sections.size()));
  for (const auto& [name, bytes] : c.sections) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    detail::put_bytes(out, name);
    detail::put<std::uint64_t>(out, bytes.size());
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  const Digest d = Sha256().update(out).finish();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

/// Hex SHA-256 trailer of an encoded container.
inline std::string container_hash(std::span<const std::uint8_t> encoded) {
  if (encoded.size() < 32) throw CheckpointError("checkpoint truncated");
  return to_hex(encoded.subspan(encoded.size() - 32));
}

inline Container decode_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(Container::kMagic) + 32 ||
      std::memcmp(bytes.data(), Container::kMagic, sizeof(Container::kMagic)) != 0)
    throw CheckpointError("not a checkpoint container");
  const auto body = bytes.first(bytes.size() - 32);
  const Digest expect = Sha256().update(body).finish();
  if (std::memcmp(expect.data(), bytes.data() + body.size(), 32) != 0)
    throw CheckpointError("checkpoint content hash mismatch");
  detail::Cursor cur(body);
  cur.take(sizeof(Container::kMagic));
  const auto version = cur.get<std::uint32_t>();
  if (version != Container::kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Container c;
  const auto kind = cur.take(cur.get<std::uint32_t>());
  c.kind.assign(kind.begin(), kind.end());
  const auto header = cur.take(cur.get<std::uint64_t>());
  try {
    c.header = nlohmann::json::parse(header.begin(), header.end());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = cur.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = cur.take(cur.get<std::uint32_t>());
    const auto data = cur.take(cur.get<std::uint64_t>());
    c.sections.emplace_back(std::string(name.begin(), name.end()), std::vector<std::uint8_t>(data.begin(), data.end()));
  }
  if (cur.pos() != body.size()) throw CheckpointError("trailing bytes in checkpoint");
  return c;
}

inline void save_container(const std::filesystem::path& path, const Container& c) {
  write_file_bytes(path, encode_container(c));
}

inline Container load_container(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  return decode_container(bytes);
}

}  // namespace chairgan
