#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "chairgan/core/container.hpp"
#include "chairgan/core/hash.hpp"
#include "chairgan/core/image.hpp"
#include "chairgan/core/image_io.hpp"
#include "chairgan/core/resample.hpp"
#include "chairgan/core/rng.hpp"
#include "chairgan/core/tensor.hpp"
#include "support.hpp"

using namespace chairgan;
using testing_support::TempDir;

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string_view("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(std::string_view("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Rng, StateRoundTripContinuesStream) {
  Rng a(42);
  for (int i = 0; i < 10; ++i) a.next_u64();
  Rng b;
  b.set_state(a.state());
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  EXPECT_THROW(b.set_state("not a state"), InvalidArgument);
}

TEST(Rng, UniformRangeAndBelowBound) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-1.0, 1.0);
    ASSERT_GE(u, -1.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
  }
  EXPECT_THROW(r.below(0), InvalidArgument);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(3);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  r.shuffle(v);
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_EQ(*s.begin(), 0);
  EXPECT_EQ(*s.rbegin(), 49);
}

TEST(Rng, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(derive_seed(7, s));
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Image, NormalizeEndpoints) {
  RgbImage black(5, 4, 0), white(5, 4, 255);
  const auto nb = normalize(black);
  for (float v : nb.data) EXPECT_EQ(v, -1.0f);
  const auto nw = normalize(white);
  for (float v : nw.data) EXPECT_EQ(v, 1.0f);
}

TEST(Image, ByteRoundTripIsExact) {
  RgbImage img(256, 1);
  for (int x = 0; x < 256; ++x)
    for (int c = 0; c < 3; ++c) img.at(x, 0)[c] = static_cast<std::uint8_t>(x);
  EXPECT_EQ(to_rgb(normalize(img)), img);
}

TEST(ImageIo, PngRoundTrip) {
  RgbImage img(7, 5);
  Rng r(9);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(r.below(256));
  const auto bytes = encode_png(img);
  EXPECT_EQ(decode_png(bytes), img);
  EXPECT_EQ(encode_png(img), bytes);
}

TEST(ImageIo, PpmDecode) {
  const std::string ppm = "P6\n# comment\n2 1\n255\n";
  std::vector<std::uint8_t> bytes(ppm.begin(), ppm.end());
  for (std::uint8_t b : {10, 20, 30, 40, 50, 60}) bytes.push_back(b);
  const auto img = decode_image(bytes);
  ASSERT_EQ(img.width, 2);
  ASSERT_EQ(img.height, 1);
  EXPECT_EQ(img.at(1, 0)[2], 60);
}

TEST(ImageIo, GarbageIsDecodeError) {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(decode_image(junk), DecodeError);
  auto png = encode_png(RgbImage(4, 4, 100));
  png.resize(png.size() / 2);
  EXPECT_THROW(decode_image(png), DecodeError);
}

TEST(Resample, ConstantIsPreserved) {
  for (int factor : {1, 2, 4, 8}) {
    NormalizedImage img(3, 32, 32, 0.5f);
    const auto out = downscale(img, factor);
    ASSERT_EQ(out.height, 32 / factor);
    for (float v : out.data) ASSERT_NEAR(v, 0.5f, 1e-6f);
  }
}

TEST(Resample, DownscaleShapes) {
  EXPECT_EQ(downscale(NormalizedImage(3, 256, 256), 4).height, 64);
  EXPECT_EQ(downscale(NormalizedImage(3, 256, 256), 4).width, 64);
  EXPECT_THROW(downscale(NormalizedImage(3, 63, 64), 4), ShapeError);
}

TEST(Resample, LinearRampPreservedAwayFromEdges) {
  // A symmetric, normalised kernel reproduces affine signals exactly.
  NormalizedImage img(1, 8, 64);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 64; ++x) img.at(0, y, x) = -0.9f + 1.8f * (x + 0.5f) / 64.0f;
  const auto out = resize_bicubic(img, 8, 16);
  for (int x = 3; x < 13; ++x) {
    const double centre = (x + 0.5) * 4.0;
    EXPECT_NEAR(out.at(0, 4, x), -0.9 + 1.8 * centre / 64.0, 1e-5);
  }
}

TEST(Resample, OutputClamped) {
  NormalizedImage img(1, 16, 16, -1.0f);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x) img.at(0, y, x) = 1.0f;
  EXPECT_TRUE(upscale_bicubic(img, 4).valid());
  EXPECT_TRUE(downscale(img, 2).valid());
}

TEST(Resample, NearestReplicatesBlocks) {
  NormalizedImage img(1, 2, 2);
  img.data = {0.1f, 0.2f, 0.3f, 0.4f};
  const auto up = upscale_nearest(img, 4);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(up.at(0, y, x), img.at(0, y / 4, x / 4));
}

TEST(Resample, SquarePlanGeometry) {
  const auto p = plan_square_resize(300, 200, 64);
  EXPECT_EQ(p.resized_width, 96);
  EXPECT_EQ(p.resized_height, 64);
  EXPECT_EQ(p.crop_x, 16);
  EXPECT_EQ(p.crop_y, 0);
  const auto q = plan_square_resize(200, 300, 64);
  EXPECT_EQ(q.resized_width, 64);
  EXPECT_EQ(q.resized_height, 96);
  EXPECT_EQ(q.crop_y, 16);
}

TEST(Tensor, SliceConcatRoundTrip) {
  Tensor<double> t(4, 2, 3, 3);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  const auto back = concat_batch<double>({slice_batch(t, 0, 1), slice_batch(t, 1, 3)});
  EXPECT_EQ(back, t);
  EXPECT_THROW(slice_batch(t, 3, 2), ShapeError);
}

namespace {

Container sample_container() {
  Container c;
  c.kind = "test.kind";
  c.header = {{"a", 1}, {"b", "two"}};
  const std::vector<float> w{1.5f, -2.0f, 3.25f};
  c.add("w", pack_values(std::span<const float>(w)));
  c.add("empty", {});
  return c;
}

}  // namespace

TEST(Container, RoundTripByteIdentical) {
  const auto bytes = encode_container(sample_container());
  const Container back = decode_container(bytes);
  EXPECT_EQ(back.kind, "test.kind");
  EXPECT_EQ(back.header["b"], "two");
  EXPECT_EQ(unpack_values<float>(back.at("w")), (std::vector<float>{1.5f, -2.0f, 3.25f}));
  EXPECT_EQ(encode_container(back), bytes);
  EXPECT_THROW(back.at("missing"), CheckpointError);
}

TEST(Container, AnySingleByteCorruptionDetected) {
  const auto bytes = encode_container(sample_container());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto bad = bytes;
    bad[i] ^= 0x01;
    EXPECT_THROW(decode_container(bad), CheckpointError) << "byte " << i;
  }
}

TEST(Container, TruncationDetected) {
  const auto bytes = encode_container(sample_container());
  for (std::size_t n : {std::size_t{0}, std::size_t{10}, bytes.size() - 1}) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_THROW(decode_container(cut), CheckpointError);
  }
}

TEST(Container, MissingFileIsCheckpointError) {
  TempDir dir("container");
  EXPECT_THROW(load_container(dir / "nope.ckpt"), CheckpointError);
}
