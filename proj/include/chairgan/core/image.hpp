#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/core/tensor.hpp"

namespace chairgan {

/// 8-bit interleaved RGB raster as stored on disk.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Planar image with values in [-1, 1]; channels x height x width.
struct NormalizedImage {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  NormalizedImage() = default;
  NormalizedImage(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

  bool same_shape(const NormalizedImage& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  /// Every element finite and inside [-1, 1].
  bool valid() const {
    return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v) && v >= -1.0f && v <= 1.0f; });
  }

  friend bool operator==(const NormalizedImage&, const NormalizedImage&) = default;
};

inline float normalize_byte(std::uint8_t p) { return 2.0f * static_cast<float>(p) / 255.0f - 1.0f; }

inline std::uint8_t quantize_unit(float v) {
  const float scaled = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0f, 255.0f));
}

inline NormalizedImage normalize(const RgbImage& img) {
  NormalizedImage out(3, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = normalize_byte(img.at(x, y)[c]);
  return out;
}

inline RgbImage to_rgb(const NormalizedImage& img) {
  if (img.channels != 3) throw ShapeError("to_rgb: expected 3 channels");
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y)[c] = quantize_unit(img.at(c, y, x));
  return out;
}

template <typename T>
Tensor<T> stack_images(const std::vector<NormalizedImage>& images) {
  if (images.empty()) throw ShapeError("stack_images: empty batch");
  const auto& first = images.front();
  Tensor<T> out(static_cast<int>(images.size()), first.channels, first.height, first.width);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(first)) throw ShapeError("stack_images: mixed image shapes");
    auto dst = out.sample(static_cast<int>(i));
    std::transform(images[i].data.begin(), images[i].data.end(), dst.begin(), [](float v) { return static_cast<T>(v); });
  }
  return out;
}

template <typename T>
std::vector<NormalizedImage> unstack_images(const Tensor<T>& batch) {
  std::vector<NormalizedImage> out;
  out.reserve(static_cast<std::size_t>(batch.n()));
  for (int i = 0; i < batch.n(); ++i) {
    NormalizedImage img(batch.c(), batch.h(), batch.w());
    auto src = batch.sample(i);
    std::transform(src.begin(), src.end(), img.data.begin(), [](T v) { return static_cast<float>(v); });
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace chairgan
