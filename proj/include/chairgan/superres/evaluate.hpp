#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/core/image.hpp"
#include "chairgan/core/resample.hpp"
#include "chairgan/dataset/pairs.hpp"
#include "chairgan/superres/network.hpp"

namespace chairgan::superres {

/// Peak signal-to-noise ratio in dB with both images mapped to [0, 1] and a
/// peak of 1. Identical images give +infinity.
inline double psnr(const NormalizedImage& a, const NormalizedImage& b) {
  if (!a.same_shape(b)) throw ShapeError("psnr: image shapes differ");
  if (a.data.empty()) throw ShapeError("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = 0.5 * (static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

struct PairScore {
  std::string source_id;
  double model = 0.0;
  double nearest = 0.0;
  double bicubic = 0.0;
};

struct SrReport {
  std::vector<PairScore> pairs;
  double mean_model = 0.0;
  double mean_nearest = 0.0;
  double mean_bicubic = 0.0;
};

using Upscaler = std::function<NormalizedImage(const NormalizedImage&)>;

inline SrReport evaluate_sr(const Upscaler& model, const std::vector<dataset::ResolutionPair>& pairs) {
  if (pairs.empty()) throw InvalidArgument("evaluate_sr: no pairs");
  SrReport rep;
  for (const auto& p : pairs) {
    PairScore s;
    s.source_id = p.source_id;
    s.model = psnr(model(p.lr), p.hr);
    s.nearest = psnr(upscale_nearest(p.lr, kScaleFactor), p.hr);
    s.bicubic = psnr(upscale_bicubic(p.lr, kScaleFactor), p.hr);
    rep.mean_model += s.model;
    rep.mean_nearest += s.nearest;
    rep.mean_bicubic += s.bicubic;
    rep.pairs.push_back(std::move(s));
  }
  const double n = static_cast<double>(rep.pairs.size());
  rep.mean_model /= n;
  rep.mean_nearest /= n;
  rep.mean_bicubic /= n;
  return rep;
}

template <typename T>
SrReport evaluate_sr(SRGenerator<T>& gen, const std::vector<dataset::ResolutionPair>& pairs) {
  return evaluate_sr([&gen](const NormalizedImage& lr) { return upscale(gen, lr); }, pairs);
}

/// JSON cannot carry infinities; they are written as the string "inf".
inline nlohmann::json psnr_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline nlohmann::json to_json(const SrReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : r.pairs)
    rows.push_back({{"source_id", p.source_id},
                    {"psnr_model", psnr_json(p.model)},
                    {"psnr_nearest", psnr_json(p.nearest)},
                    {"psnr_bicubic", psnr_json(p.bicubic)}});
  return {{"format", "chairgan.sr_eval.v1"},
          {"pairs", rows},
          {"mean", {{"model", psnr_json(r.mean_model)}, {"nearest", psnr_json(r.mean_nearest)}, {"bicubic", psnr_json(r.mean_bicubic)}}}};
}

}  // namespace chairgan::superres
