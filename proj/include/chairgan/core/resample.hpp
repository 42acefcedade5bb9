#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/core/image.hpp"

namespace chairgan {

/// Keys cubic convolution kernel with a = -0.5.
inline double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

namespace detail {

struct AxisTaps {
  int first = 0;
  std::vector<double> weights;
};

/// Per-output-sample taps for a separable resample of one axis. When
/// shrinking, the kernel is stretched by the scale (antialiasing); weights are
/// renormalised after edge clipping so constant signals are preserved.
inline std::vector<AxisTaps> axis_taps(int in_len, int out_len) {
  const double scale = static_cast<double>(in_len) / out_len;
  const double filter_scale = std::max(scale, 1.0);
  const double support = 2.0 * filter_scale;
  std::vector<AxisTaps> taps(static_cast<std::size_t>(out_len));
  for (int i = 0; i < out_len; ++i) {
    const double center = (i + 0.5) * scale;
    const int lo = std::max(0, static_cast<int>(std::floor(center - support + 0.5)));
    const int hi = std::min(in_len, static_cast<int>(std::floor(center + support + 0.5)));
    auto& t = taps[static_cast<std::size_t>(i)];
    t.first = lo;
    double total = 0.0;
    for (int j = lo; j < hi; ++j) {
      const double w = cubic_kernel((j + 0.5 - center) / filter_scale);
      t.weights.push_back(w);
      total += w;
    }
    if (total != 0.0)
      for (auto& w : t.weights) w /= total;
  }
  return taps;
}

}  // namespace detail

/// Separable bicubic resample of every channel to out_h x out_w.
inline std::vector<double> resample_plane(const std::vector<double>& src, int in_h, int in_w, int out_h, int out_w) {
  const auto htaps = detail::axis_taps(in_w, out_w);
  const auto vtaps = detail::axis_taps(in_h, out_h);
  std::vector<double> tmp(static_cast<std::size_t>(in_h) * out_w);
  for (int y = 0; y < in_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const auto& t = htaps[static_cast<std::size_t>(x)];
      double acc = 0.0;
      for (std::size_t k = 0; k < t.weights.size(); ++k)
        acc += t.weights[k] * src[static_cast<std::size_t>(y) * in_w + t.first + static_cast<int>(k)];
      tmp[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto& t = vtaps[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < t.weights.size(); ++k)
        acc += t.weights[k] * tmp[static_cast<std::size_t>(t.first + static_cast<int>(k)) * out_w + x];
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  return out;
}

/// Bicubic resize of a normalized image; output clamped to [-1, 1].
inline NormalizedImage resize_bicubic(const NormalizedImage& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bicubic: non-positive target size");
  NormalizedImage out(img.channels, out_h, out_w);
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (int c = 0; c < img.channels; ++c) {
    std::vector<double> src(img.data.begin() + static_cast<std::ptrdiff_t>(c * plane),
                            img.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane));
    const auto res = resample_plane(src, img.height, img.width, out_h, out_w);
    for (std::size_t i = 0; i < res.size(); ++i)
      out.data[c * res.size() + i] = static_cast<float>(std::clamp(res[i], -1.0, 1.0));
  }
  return out;
}

/// Bicubic downscale by an integer factor. Height and width must divide.
inline NormalizedImage downscale(const NormalizedImage& img, int factor) {
  if (factor < 1) throw InvalidArgument("downscale: factor must be >= 1");
  if (img.height % factor != 0 || img.width % factor != 0)
    throw ShapeError("downscale: " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                     " not divisible by " + std::to_string(factor));
  return resize_bicubic(img, img.height / factor, img.width / factor);
}

inline NormalizedImage upscale_nearest(const NormalizedImage& img, int factor) {
  if (factor < 1) throw InvalidArgument("upscale_nearest: factor must be >= 1");
  NormalizedImage out(img.channels, img.height * factor, img.width * factor);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = img.at(c, y / factor, x / factor);
  return out;
}

inline NormalizedImage upscale_bicubic(const NormalizedImage& img, int factor) {
  if (factor < 1) throw InvalidArgument("upscale_bicubic: factor must be >= 1");
  return resize_bicubic(img, img.height * factor, img.width * factor);
}

/// Shortest-side resize followed by a centered square crop.
struct ResizePlan {
  int resized_width = 0;
  int resized_height = 0;
  int crop_x = 0;
  int crop_y = 0;
  int size = 0;
};

inline ResizePlan plan_square_resize(int width, int height, int target) {
  if (width <= 0 || height <= 0 || target <= 0) throw InvalidArgument("plan_square_resize: non-positive size");
  ResizePlan p;
  p.size = target;
  if (width <= height) {
    p.resized_width = target;
    p.resized_height = std::max(target, static_cast<int>(std::lround(static_cast<double>(height) * target / width)));
  } else {
    p.resized_height = target;
    p.resized_width = std::max(target, static_cast<int>(std::lround(static_cast<double>(width) * target / height)));
  }
  p.crop_x = (p.resized_width - target) / 2;
  p.crop_y = (p.resized_height - target) / 2;
  return p;
}

inline NormalizedImage crop(const NormalizedImage& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height) throw ShapeError("crop out of bounds");
  NormalizedImage out(img.channels, h, w);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

inline NormalizedImage resize_and_center_crop(const NormalizedImage& img, int target) {
  const auto plan = plan_square_resize(img.width, img.height, target);
  const NormalizedImage resized = (plan.resized_width == img.width && plan.resized_height == img.height)
                                      ? img
                                      : resize_bicubic(img, plan.resized_height, plan.resized_width);
  return crop(resized, plan.crop_x, plan.crop_y, target, target);
}

}  // namespace chairgan
