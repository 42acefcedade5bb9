#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/core/image_io.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/dataset/ingest.hpp"

namespace chairgan::dataset {

using Rgb = std::array<std::uint8_t, 3>;

/// Axis-aligned rectangle in pixel coordinates, [x0, x1) x [y0, y1).
struct Rect {
  double x0, y0, x1, y1;
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// Parameters of one procedural chair. All coordinates in pixels.
struct ChairGeometry {
  Rgb background_top{};
  Rgb background_bottom{};
  Rgb body_color{};  // seat and backrest
  Rgb leg_color{};
  Rect seat{};
  Rect backrest{};
  std::vector<Rect> legs;  // 2 to 4
  double floor_y = 0.0;    // bottom edge of every leg
};

inline Rgb random_color(Rng& rng, int lo, int hi) {
  Rgb c;
  for (auto& v : c) v = static_cast<std::uint8_t>(lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))));
  return c;
}

/// Draws a chair: seat slab, backrest (side or front view) and 2-4 legs
/// reaching a floor line inside the bottom tenth of the frame. Chair colors
/// are dark and backgrounds light so silhouettes always separate.
inline ChairGeometry sample_chair_geometry(Rng& rng, int resolution) {
  const double r = resolution;
  const double min_px = 2.0;
  ChairGeometry g;
  g.background_top = random_color(rng, 170, 255);
  g.background_bottom = random_color(rng, 150, 240);
  g.body_color = random_color(rng, 0, 110);
  g.leg_color = random_color(rng, 0, 90);

  const double seat_w = rng.uniform(0.42, 0.72) * r;
  const double cx = r / 2 + rng.uniform(-0.06, 0.06) * r;
  const double seat_top = rng.uniform(0.46, 0.60) * r;
  const double seat_h = std::max(min_px, rng.uniform(0.05, 0.10) * r);
  g.seat = {cx - seat_w / 2, seat_top, cx + seat_w / 2, seat_top + seat_h};

  const double back_top = rng.uniform(0.08, 0.28) * r;
  if (rng.uniform() < 0.5) {
    // side view: one post at either end of the seat
    const double post_w = std::max(min_px, rng.uniform(0.05, 0.11) * r);
    if (rng.uniform() < 0.5)
      g.backrest = {g.seat.x0, back_top, g.seat.x0 + post_w, seat_top};
    else
      g.backrest = {g.seat.x1 - post_w, back_top, g.seat.x1, seat_top};
  } else {
    // front view: panel inset from the seat ends
    const double inset = rng.uniform(0.0, 0.12) * seat_w;
    g.backrest = {g.seat.x0 + inset, back_top, g.seat.x1 - inset, seat_top};
  }

  g.floor_y = rng.uniform(0.93, 0.98) * r;
  const int n_legs = 2 + static_cast<int>(rng.below(3));
  const double leg_w = std::max(min_px, rng.uniform(0.03, 0.06) * r);
  const double inset = rng.uniform(0.0, 0.08) * seat_w;
  const double span = seat_w - 2 * inset - leg_w;
  for (int i = 0; i < n_legs; ++i) {
    const double x0 = g.seat.x0 + inset + span * i / (n_legs - 1);
    g.legs.push_back({x0, g.seat.y1, x0 + leg_w, g.floor_y});
  }
  return g;
}

/// Rasterizes with 4x4 supersampling per pixel.
inline RgbImage render_chair(const ChairGeometry& g, int resolution) {
  constexpr int kSub = 4;
  RgbImage img(resolution, resolution);
  for (int y = 0; y < resolution; ++y) {
    const double t = resolution > 1 ? static_cast<double>(y) / (resolution - 1) : 0.0;
    std::array<double, 3> bg;
    for (int c = 0; c < 3; ++c) bg[c] = (1 - t) * g.background_top[c] + t * g.background_bottom[c];
    for (int x = 0; x < resolution; ++x) {
      std::array<double, 3> acc{0, 0, 0};
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x + (sx + 0.5) / kSub, py = y + (sy + 0.5) / kSub;
          const Rgb* color = nullptr;
          if (g.seat.contains(px, py) || g.backrest.contains(px, py)) color = &g.body_color;
          for (const auto& leg : g.legs)
            if (!color && leg.contains(px, py)) color = &g.leg_color;
          for (int c = 0; c < 3; ++c) acc[c] += color ? (*color)[c] : bg[c];
        }
      for (int c = 0; c < 3; ++c)
        img.at(x, y)[c] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[c] / (kSub * kSub)), 0L, 255L));
    }
  }
  return img;
}

inline std::string synth_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "chair_%05zu.png", index);
  return buf;
}

/// Writes n chairs as PNG files into out_dir and ingests the directory.
inline DatasetManifest synth_chair_corpus(std::size_t n, int resolution, std::uint64_t seed,
                                          const std::filesystem::path& out_dir) {
  if (n < 1) throw InvalidArgument("synth_chair_corpus: n must be >= 1");
  if (resolution < kMinImageSide) throw InvalidArgument("synth_chair_corpus: resolution below minimum");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto geom = sample_chair_geometry(rng, resolution);
    write_png(out_dir / synth_file_name(i), render_chair(geom, resolution));
  }
  return ingest_corpus(out_dir, resolution, seed);
}

/// Geometry of the i-th chair of a corpus drawn with (seed, resolution).
inline ChairGeometry synth_chair_geometry(std::size_t index, int resolution, std::uint64_t seed) {
  Rng rng(derive_seed(seed, index));
  return sample_chair_geometry(rng, resolution);
}

}  // namespace chairgan::dataset
