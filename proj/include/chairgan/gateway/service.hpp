#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/candidates/catalog.hpp"
#include "chairgan/candidates/generate.hpp"
#include "chairgan/candidates/navigation.hpp"
#include "chairgan/candidates/selection.hpp"
#include "chairgan/core/error.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/core/image_io.hpp"

namespace chairgan::gateway {

struct ServiceConfig {
  std::filesystem::path catalog_dir;
  std::filesystem::path gen_checkpoint;
  std::filesystem::path sr_checkpoint;
  std::filesystem::path selections_dir;
  /// Content-addressed PNGs of on-demand frames (interpolation, neighborhood).
  std::filesystem::path frames_dir;
  std::size_t max_batch = 16;
  std::size_t max_page = 500;
};

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// Machine-readable error reported to API clients.
struct ApiError {
  std::string code;
  std::string message;
  int status = 500;
};

inline int status_for(const std::string& code) {
  static const std::map<std::string, int> table{
      {"invalid_argument", 400}, {"shape_error", 400},      {"config_error", 400},   {"decode_error", 400},
      {"invalid_json", 400},     {"not_found", 404},        {"route_not_found", 404}, {"method_not_allowed", 405},
      {"revision_conflict", 409}, {"batch_too_large", 413}, {"checkpoint_error", 500}, {"io_error", 500},
      {"corrupt_manifest", 500}, {"internal", 500}};
  const auto it = table.find(code);
  return it == table.end() ? 500 : it->second;
}

inline ApiError api_error(const std::string& code, const std::string& message) { return {code, message, status_for(code)}; }

inline Response error_response(const ApiError& e) {
  return {e.status, "application/json", nlohmann::json{{"error", {{"code", e.code}, {"message", e.message}}}}.dump()};
}

inline Response json_response(const nlohmann::json& j, int status = 200) { return {status, "application/json", j.dump()}; }

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Request handling for the studio API. Reads run concurrently; catalog
/// appends take an exclusive lock; all model inference goes through one
/// mutex, which acts as the single generation worker.
class Service {
 public:
  explicit Service(ServiceConfig cfg)
      : cfg_(std::move(cfg)), catalog_(candidates::load_catalog(cfg_.catalog_dir)),
        models_(std::make_unique<candidates::ModelPair>(candidates::load_models(cfg_.gen_checkpoint, cfg_.sr_checkpoint))),
        selections_(cfg_.selections_dir, [this](const std::string& id) {
          std::shared_lock lock(catalog_mutex_);
          return catalog_.contains(id);
        }) {
    std::error_code ec;
    std::filesystem::create_directories(cfg_.frames_dir, ec);
    if (ec) throw IoError("cannot create " + cfg_.frames_dir.string());
  }

  Response handle(const Request& req) noexcept {
    try {
      return route(req);
    } catch (const ApiError& e) {
      return error_response(e);
    } catch (const Error& e) {
      return error_response(api_error(e.code(), e.what()));
    } catch (const nlohmann::json::exception& e) {
      return error_response(api_error("invalid_json", e.what()));
    } catch (const std::exception& e) {
      return error_response(api_error("internal", e.what()));
    }
  }

  std::size_t catalog_size() const {
    std::shared_lock lock(catalog_mutex_);
    return catalog_.size();
  }

 private:
  Response route(const Request& req) {
    static const std::regex candidate_re(R"(^/candidates/([A-Za-z0-9_-]+)$)");
    static const std::regex image_re(R"(^/candidates/([A-Za-z0-9_-]+)/image$)");
    static const std::regex selection_re(R"(^/selections/([^/]+)$)");
    static const std::regex sheet_re(R"(^/selections/([^/]+)/sheet$)");
    static const std::regex frame_re(R"(^/frames/([0-9a-f]{64})\.png$)");
    std::smatch m;
    const std::string& p = req.path;
    const bool get = req.method == "GET", post = req.method == "POST";
    auto only = [&](bool ok) {
      if (!ok) throw api_error("method_not_allowed", req.method + " not allowed on " + p);
    };

    if (p == "/health") {
      only(get);
      return health();
    }
    if (p == "/candidates") {
      only(get);
      return list(req);
    }
    if (std::regex_match(p, m, candidate_re)) {
      only(get);
      return candidate(m[1]);
    }
    if (std::regex_match(p, m, image_re)) {
      only(get);
      return image(m[1], query(req, "kind", "sr"));
    }
    if (p == "/generate") {
      only(post);
      return generate(body(req));
    }
    if (p == "/interpolate") {
      only(post);
      return interpolate(body(req));
    }
    if (p == "/neighborhood") {
      only(post);
      return neighborhood(body(req));
    }
    if (std::regex_match(p, m, sheet_re)) {
      only(get);
      return sheet(m[1], req);
    }
    if (std::regex_match(p, m, selection_re)) {
      only(get || post);
      return get ? json_response(selections_.get(m[1])) : update_selection(m[1], body(req));
    }
    if (std::regex_match(p, m, frame_re)) {
      only(get);
      return frame(m[1]);
    }
    throw api_error("route_not_found", "no route for " + p);
  }

  static std::string query(const Request& req, const std::string& key, const std::string& fallback) {
    const auto it = req.query.find(key);
    return it == req.query.end() ? fallback : it->second;
  }

  static std::uint64_t parse_count(const std::string& s, const std::string& what) {
    if (s.empty() || s.size() > 18 || s.find_first_not_of("0123456789") != std::string::npos)
      throw api_error("invalid_argument", what + " must be a non-negative integer");
    return std::stoull(s);
  }

  static nlohmann::json body(const Request& req) {
    auto j = nlohmann::json::parse(req.body.empty() ? "{}" : req.body);
    if (!j.is_object()) throw api_error("invalid_json", "request body must be a JSON object");
    return j;
  }

  void check_batch(std::size_t n, const std::string& what) const {
    if (n > cfg_.max_batch)
      throw api_error("batch_too_large", what + " " + std::to_string(n) + " exceeds the per-request limit of " +
                                             std::to_string(cfg_.max_batch));
  }

  static nlohmann::json record_json(const candidates::CandidateRecord& r) {
    nlohmann::json j = r;
    j["lr_url"] = "/candidates/" + r.id + "/image?kind=lr";
    j["sr_url"] = "/candidates/" + r.id + "/image?kind=sr";
    return j;
  }

  Response health() const {
    return json_response({{"status", "ok"}, {"candidates", catalog_size()}});
  }

  Response list(const Request& req) const {
    const auto offset = parse_count(query(req, "offset", "0"), "offset");
    const auto limit = parse_count(query(req, "limit", "50"), "limit");
    if (limit < 1 || limit > cfg_.max_page)
      throw api_error("invalid_argument", "limit must be in 1.." + std::to_string(cfg_.max_page));
    std::shared_lock lock(catalog_mutex_);
    const auto& recs = catalog_.records();
    nlohmann::json items = nlohmann::json::array();
    for (std::uint64_t i = offset; i < recs.size() && i < offset + limit; ++i) items.push_back(record_json(recs[i]));
    return json_response({{"offset", offset}, {"limit", limit}, {"total", recs.size()}, {"items", items}});
  }

  Response candidate(const std::string& id) const {
    std::shared_lock lock(catalog_mutex_);
    return json_response(record_json(catalog_.at(id)));
  }

  Response image(const std::string& id, const std::string& kind) const {
    if (kind != "lr" && kind != "sr") throw api_error("invalid_argument", "kind must be lr or sr");
    std::filesystem::path path;
    {
      std::shared_lock lock(catalog_mutex_);
      const auto& r = catalog_.at(id);
      path = kind == "lr" ? catalog_.lr_file(r) : catalog_.sr_file(r);
    }
    const auto bytes = read_file_bytes(path);
    return {200, "image/png", std::string(bytes.begin(), bytes.end())};
  }

  static synthesis::LatentVector parse_latent(const nlohmann::json& j, int dim) {
    synthesis::LatentVector z(j.get<std::vector<double>>());
    if (z.dim() != static_cast<std::size_t>(dim))
      throw api_error("invalid_argument", "latent must have " + std::to_string(dim) + " components");
    if (!z.in_cube()) throw api_error("invalid_argument", "latent components must lie in [-1, 1]");
    return z;
  }

  /// {count, seed} samples fresh latents; {latents: [...]} promotes given
  /// latents (e.g. interpolation frames). New records are appended.
  Response generate(const nlohmann::json& b) {
    std::vector<synthesis::LatentVector> zs;
    std::optional<std::uint64_t> seed;
    const int dim = models_->gen.config().latent_dim;
    if (b.contains("latents")) {
      for (const auto& z : b.at("latents")) zs.push_back(parse_latent(z, dim));
      if (zs.empty()) throw api_error("invalid_argument", "latents must not be empty");
    } else {
      const auto count = b.value("count", std::uint64_t{1});
      if (count < 1) throw api_error("invalid_argument", "count must be >= 1");
      check_batch(count, "count");
      seed = b.value("seed", std::uint64_t{0});
      zs = synthesis::sample_latent(count, *seed, dim);
    }
    check_batch(zs.size(), "batch");
    std::lock_guard gen_lock(model_mutex_);
    std::unique_lock lock(catalog_mutex_);
    auto recs = candidates::materialize(*models_, catalog_.dir(), zs, catalog_.size(), seed, cfg_.max_batch, utc_timestamp());
    candidates::append_records(catalog_, recs);
    nlohmann::json items = nlohmann::json::array();
    for (const auto& r : recs) items.push_back(record_json(r));
    return json_response({{"items", items}}, 201);
  }

  nlohmann::json frames(const std::vector<synthesis::LatentVector>& zs) {
    std::vector<candidates::RenderedCandidate> rendered;
    {
      std::lock_guard gen_lock(model_mutex_);
      rendered = candidates::render(*models_, zs);
    }
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < zs.size(); ++i) {
      auto store = [&](const RgbImage& img) {
        const auto png = encode_png(img);
        const auto name = sha256_hex(png) + ".png";
        const auto path = cfg_.frames_dir / name;
        if (!std::filesystem::exists(path)) write_file_bytes(path, png);
        return "/frames/" + name;
      };
      out.push_back({{"index", i}, {"latent", zs[i].values}, {"lr_url", store(rendered[i].lr)}, {"sr_url", store(rendered[i].sr)}});
    }
    return out;
  }

  Response interpolate(const nlohmann::json& b) {
    const auto steps = b.value("steps", 0);
    if (steps < 2) throw api_error("invalid_argument", "steps must be >= 2");
    check_batch(static_cast<std::size_t>(steps), "steps");
    const auto mode = candidates::parse_interp_mode(b.value("mode", std::string("linear")));
    synthesis::LatentVector a, z;
    {
      std::shared_lock lock(catalog_mutex_);
      a = catalog_.at(b.at("from_id").get<std::string>()).latent;
      z = catalog_.at(b.at("to_id").get<std::string>()).latent;
    }
    const auto path = candidates::interpolate_latents(a, z, steps, mode);
    return json_response({{"from_id", b.at("from_id")}, {"to_id", b.at("to_id")}, {"frames", frames(path)}});
  }

  Response neighborhood(const nlohmann::json& b) {
    const auto n = b.value("n", std::uint64_t{0});
    if (n < 1) throw api_error("invalid_argument", "n must be >= 1");
    check_batch(n, "n");
    synthesis::LatentVector center;
    {
      std::shared_lock lock(catalog_mutex_);
      center = catalog_.at(b.at("id").get<std::string>()).latent;
    }
    const auto zs = candidates::neighborhood_samples(center, b.value("radius", 0.0), n, b.value("seed", std::uint64_t{0}));
    return json_response({{"id", b.at("id")}, {"frames", frames(zs)}});
  }

  Response update_selection(const std::string& name, const nlohmann::json& b) {
    if (!b.contains("expected_revision")) throw api_error("invalid_argument", "expected_revision is required");
    auto items = b.value("items", nlohmann::json::array()).get<std::vector<candidates::SelectionItem>>();
    return json_response(selections_.replace(name, b.at("expected_revision").get<std::uint64_t>(), std::move(items)));
  }

  Response sheet(const std::string& name, const Request& req) {
    const auto set = selections_.get(name);
    if (set.items.empty()) throw api_error("invalid_argument", "selection " + name + " is empty");
    const auto columns = parse_count(query(req, "columns", "3"), "columns");
    if (columns < 1 || columns > 64) throw api_error("invalid_argument", "columns must be in 1..64");
    RgbImage img;
    {
      std::shared_lock lock(catalog_mutex_);
      img = candidates::export_grid(catalog_, set.ids(), static_cast<int>(columns));
    }
    const auto png = encode_png(img);
    return {200, "image/png", std::string(png.begin(), png.end())};
  }

  Response frame(const std::string& hash) const {
    const auto path = cfg_.frames_dir / (hash + ".png");
    if (!std::filesystem::exists(path)) throw api_error("not_found", "no frame " + hash);
    const auto bytes = read_file_bytes(path);
    return {200, "image/png", std::string(bytes.begin(), bytes.end())};
  }

  ServiceConfig cfg_;
  mutable std::shared_mutex catalog_mutex_;
  candidates::CandidateCatalog catalog_;
  std::mutex model_mutex_;
  std::unique_ptr<candidates::ModelPair> models_;
  candidates::SelectionStore selections_;
};

}  // namespace chairgan::gateway
