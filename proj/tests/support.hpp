#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>
#include <vector>

#include "chairgan/core/rng.hpp"
#include "chairgan/nn/layer.hpp"

namespace testing_support {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("chairgan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

/// Compares analytic gradients (already in each param's grad) against
/// five-point central differences of `loss`. The error of one entry is
/// |a - n| / max(|a|, |n|); entries where both sides are below `tiny` are
/// compared absolutely instead, since their relative error is pure noise.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10e", v);
  return buf;
}

inline GradCheck check_gradients(const std::vector<chairgan::nn::ParamRef<double>>& params,
                                 const std::function<double()>& loss, double h = 1e-5, double tiny = 1e-9,
                                 std::size_t max_per_param = 0) {
  GradCheck out;
  for (const auto& ref : params) {
    auto& p = *ref.param;
    const std::size_t n = p.size();
    const std::size_t stride = (max_per_param == 0 || n <= max_per_param) ? 1 : (n + max_per_param - 1) / max_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = p.value[i];
      auto at = [&](double d) {
        p.value[i] = saved + d;
        return loss();
      };
      const double d1 = at(h) - at(-h), d2 = at(2 * h) - at(-2 * h);
      p.value[i] = saved;
      const double numeric = (8.0 * d1 - d2) / (12.0 * h);
      const double analytic = p.grad[i];
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      const double err = scale < tiny ? std::abs(analytic - numeric) : std::abs(analytic - numeric) / scale;
      ++out.checked;
      if (err > out.max_rel) {
        out.max_rel = err;
        out.worst = ref.name + "[" + std::to_string(i) + "] analytic " + num(analytic) + " numeric " + num(numeric);
      }
    }
  }
  return out;
}

/// Overwrites every parameter with N(0, sd) draws.
inline void randomize(const std::vector<chairgan::nn::ParamRef<double>>& params, std::uint64_t seed, double sd) {
  chairgan::Rng rng(seed);
  for (const auto& r : params)
    for (auto& v : r.param->value) v = rng.normal(0.0, sd);
}

}  // namespace testing_support
