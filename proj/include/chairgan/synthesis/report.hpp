#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "chairgan/core/error.hpp"
#include "chairgan/core/image.hpp"
#include "chairgan/synthesis/networks.hpp"

namespace chairgan::synthesis {

struct DistributionReport {
  std::vector<double> sample_mean, real_mean;  // per channel
  std::vector<double> sample_std, real_std;
  std::vector<double> mean_gap, std_gap;  // |sample - real| per channel
  double mean_gap_avg = 0.0;
  double std_gap_avg = 0.0;
  /// Mean over samples of the RMS pixel distance to the closest real image.
  double nn_distance = 0.0;
};

inline void channel_stats(const std::vector<NormalizedImage>& imgs, std::vector<double>& mean, std::vector<double>& sd) {
  const int c = imgs.front().channels;
  mean.assign(static_cast<std::size_t>(c), 0.0);
  sd.assign(static_cast<std::size_t>(c), 0.0);
  const std::size_t plane = static_cast<std::size_t>(imgs.front().height) * imgs.front().width;
  const double count = static_cast<double>(plane * imgs.size());
  for (const auto& img : imgs)
    for (int k = 0; k < c; ++k)
      for (std::size_t j = 0; j < plane; ++j) mean[static_cast<std::size_t>(k)] += img.data[k * plane + j];
  for (auto& m : mean) m /= count;
  for (const auto& img : imgs)
    for (int k = 0; k < c; ++k)
      for (std::size_t j = 0; j < plane; ++j) {
        const double d = img.data[k * plane + j] - mean[static_cast<std::size_t>(k)];
        sd[static_cast<std::size_t>(k)] += d * d;
      }
  for (auto& s : sd) s = std::sqrt(s / count);
}

inline double rms_distance(const NormalizedImage& a, const NormalizedImage& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.data.size()));
}

inline DistributionReport distribution_report(const std::vector<NormalizedImage>& samples,
                                              const std::vector<NormalizedImage>& real) {
  if (samples.empty() || real.empty()) throw InvalidArgument("distribution_report: empty batch");
  for (const auto& s : samples)
    if (!s.same_shape(samples.front())) throw ShapeError("distribution_report: mixed sample shapes");
  for (const auto& r : real)
    if (!r.same_shape(samples.front())) throw ShapeError("distribution_report: sample/real resolution mismatch");
  DistributionReport rep;
  channel_stats(samples, rep.sample_mean, rep.sample_std);
  channel_stats(real, rep.real_mean, rep.real_std);
  for (std::size_t k = 0; k < rep.sample_mean.size(); ++k) {
    rep.mean_gap.push_back(std::abs(rep.sample_mean[k] - rep.real_mean[k]));
    rep.std_gap.push_back(std::abs(rep.sample_std[k] - rep.real_std[k]));
    rep.mean_gap_avg += rep.mean_gap.back();
    rep.std_gap_avg += rep.std_gap.back();
  }
  rep.mean_gap_avg /= static_cast<double>(rep.mean_gap.size());
  rep.std_gap_avg /= static_cast<double>(rep.std_gap.size());
  for (const auto& s : samples) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : real) best = std::min(best, rms_distance(s, r));
    rep.nn_distance += best;
  }
  rep.nn_distance /= static_cast<double>(samples.size());
  return rep;
}

inline void to_json(nlohmann::json& j, const DistributionReport& r) {
  j = {{"sample_mean", r.sample_mean}, {"real_mean", r.real_mean}, {"sample_std", r.sample_std},
       {"real_std", r.real_std},       {"mean_gap", r.mean_gap},   {"std_gap", r.std_gap},
       {"mean_gap_avg", r.mean_gap_avg}, {"std_gap_avg", r.std_gap_avg}, {"nn_distance", r.nn_distance}};
}

/// Fraction of correct calls (real > 0.5, fake < 0.5) in inference mode.
template <typename T>
double discriminator_accuracy(Discriminator<T>& disc, const std::vector<NormalizedImage>& real,
                              const std::vector<NormalizedImage>& fake) {
  const auto pr = discriminate(disc, real);
  const auto pf = discriminate(disc, fake);
  std::size_t correct = 0;
  for (T p : pr) correct += p > T(0.5) ? 1 : 0;
  for (T p : pf) correct += p < T(0.5) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pr.size() + pf.size());
}

}  // namespace chairgan::synthesis
