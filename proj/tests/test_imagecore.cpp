#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cxr/error.hpp"
#include "cxr/imagecore/clahe.hpp"
#include "cxr/imagecore/pipeline.hpp"
#include "cxr/imagecore/transforms.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cxr;
using namespace cxr::image;

namespace {

ImageTensor plane(int h, int w, std::vector<float> v) { return ImageTensor(1, h, w, std::move(v)); }

ImageTensor random_tensor(int c, int h, int w, std::uint64_t seed, double lo = -3.0, double hi = 3.0) {
  oracle::SplitMix64 rng(seed);
  ImageTensor t(c, h, w);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

TEST(MinmaxScale, Endpoints) {
  const auto t = minmax_scale(GrayImage(2, 1, {0, 255}));
  EXPECT_EQ(t.data, (std::vector<float>{0.0f, 1.0f}));
}

TEST(MinmaxScale, ConstantImageIsZero) {
  const auto t = minmax_scale(GrayImage(3, 2, 100));
  for (float v : t.data) EXPECT_EQ(v, 0.0f);
}

TEST(MinmaxScale, ThreeLevels) {
  const auto t = minmax_scale(GrayImage(3, 1, {10, 20, 30}));
  EXPECT_EQ(t.data, (std::vector<float>{0.0f, 0.5f, 1.0f}));
}

TEST(MinmaxScale, RangeProperty) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto img = testing_support::random_gray(7 + seed % 5, 5 + seed % 3, seed, 20, 200);
    const auto t = minmax_scale(img);
    const auto [lo, hi] = std::minmax_element(t.data.begin(), t.data.end());
    const auto [plo, phi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
    EXPECT_GE(*lo, 0.0f);
    EXPECT_LE(*hi, 1.0f);
    if (*phi > *plo) {
      EXPECT_EQ(*lo, 0.0f);
      EXPECT_EQ(*hi, 1.0f);
    }
  }
}

TEST(BilinearResize, IdentityIsBitwise) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = random_tensor(1 + seed % 3, 3 + seed % 7, 4 + seed % 5, seed);
    EXPECT_EQ(bilinear_resize(t, t.height, t.width), t);
  }
}

TEST(BilinearResize, TwoByTwoToOne) {
  const auto r = bilinear_resize(plane(2, 2, {0, 1, 2, 3}), 1, 1);
  EXPECT_FLOAT_EQ(r.data[0], 1.5f);
}

TEST(BilinearResize, OneByTwoToOneByFour) {
  const auto r = bilinear_resize(plane(1, 2, {0, 10}), 1, 4);
  EXPECT_EQ(r.data, (std::vector<float>{0.0f, 2.5f, 7.5f, 10.0f}));
}

TEST(BilinearResize, MatchesOracleAndStaysInRange) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    oracle::SplitMix64 dims(seed + 1000);
    const int ih = 1 + static_cast<int>(dims.below(12)), iw = 1 + static_cast<int>(dims.below(12));
    const int oh = 1 + static_cast<int>(dims.below(20)), ow = 1 + static_cast<int>(dims.below(20));
    const auto t = random_tensor(1, ih, iw, seed);
    const auto r = bilinear_resize(t, oh, ow);
    const auto ref = oracle::resize(std::vector<double>(t.data.begin(), t.data.end()), ih, iw, oh, ow);
    const auto [lo, hi] = std::minmax_element(t.data.begin(), t.data.end());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_NEAR(r.data[i], ref[i], 1e-5);
      EXPECT_GE(r.data[i], *lo);
      EXPECT_LE(r.data[i], *hi);
    }
  }
}

TEST(ResizeShorterSide, KeepsAspectWithFloor) {
  const ImageTensor t(1, 640, 512);
  const auto r = resize_shorter_side(t, 256);
  EXPECT_EQ(r.width, 256);
  EXPECT_EQ(r.height, 320);
  const auto q = resize_shorter_side(ImageTensor(1, 300, 301), 256);
  EXPECT_EQ(q.height, 256);
  EXPECT_EQ(q.width, 256);  // floor(301 * 256 / 300) = 256
}

TEST(CenterCrop, FloorOffsets) {
  ImageTensor t(1, 5, 6);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<float>(i);
  const auto c = center_crop(t, 2, 3);
  // offsets floor(3/2)=1 and floor(3/2)=1
  EXPECT_EQ(c.data, (std::vector<float>{7, 8, 9, 13, 14, 15}));
}

TEST(ReplicateChannels, ThreeEqualChannels) {
  const auto t = random_tensor(1, 2, 2, 5);
  const auto r = replicate_channels(t);
  ASSERT_EQ(r.channels, 3);
  for (int c = 1; c < 3; ++c) {
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) EXPECT_EQ(r.at(c, y, x), r.at(0, y, x));
  }
  EXPECT_EQ(r.at(0, 1, 1), r.at(2, 1, 1));
}

TEST(ReplicateChannels, RejectsMultiChannel) {
  EXPECT_THROW(replicate_channels(ImageTensor(3, 2, 2)), ChannelError);
}

TEST(ChannelNormalize, MeanMapsToZero) {
  const NormalizationStats s;
  ImageTensor t(3, 2, 2);
  for (int c = 0; c < 3; ++c) std::fill(t.plane(c).begin(), t.plane(c).end(), s.mean[c]);
  for (float v : channel_normalize(t, s).data) EXPECT_EQ(v, 0.0f);
}

TEST(ChannelNormalize, ImageNetStatsChannelZero) {
  ImageTensor t(3, 1, 1);
  t.at(0, 0, 0) = 0.485f;
  EXPECT_EQ(channel_normalize(t, NormalizationStats{}).at(0, 0, 0), 0.0f);
}

TEST(ChannelNormalize, IdentityStats) {
  const NormalizationStats s{{0, 0, 0}, {1, 1, 1}};
  const auto t = random_tensor(3, 4, 5, 9);
  EXPECT_EQ(channel_normalize(t, s), t);
}

TEST(ChannelNormalize, InverseRecoversInput) {
  const NormalizationStats s;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = random_tensor(3, 6, 7, seed, 0.0, 1.0);
    const auto back = channel_denormalize(channel_normalize(t, s), s);
    for (std::size_t i = 0; i < t.data.size(); ++i) EXPECT_NEAR(back.data[i], t.data[i], 1e-6);
  }
}

TEST(ChannelNormalize, ChannelMismatch) {
  EXPECT_THROW(channel_normalize(ImageTensor(1, 2, 2), NormalizationStats{}), ChannelError);
}

TEST(Config, Validation) {
  EXPECT_THROW((NormalizationStats{{0, 0, 0}, {1, 0, 1}}.validate()), ConfigError);
  ClaheParams p;
  p.clip_limit = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.bins = 128;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(InferencePreprocess, ShapeAndDeterminism) {
  const auto img = testing_support::synthetic_cxr(300, 260, 3);
  const auto a = inference_preprocess(img, {}, {});
  const auto b = inference_preprocess(img, {}, {});
  EXPECT_EQ(a.channels, 3);
  EXPECT_EQ(a.height, 224);
  EXPECT_EQ(a.width, 224);
  EXPECT_EQ(a, b);
  const auto full = inference_preprocess(img, {}, {}, CropPolicy::kFullResize);
  EXPECT_EQ(full.height, 224);
  EXPECT_EQ(full.width, 224);
}

// Stage-by-stage golden built by composing the oracles.
TEST(InferencePreprocess, StagesMatchOracleComposition) {
  const auto img = testing_support::synthetic_cxr(512, 640, 11);
  const NormalizationStats s;
  const auto trace = inference_preprocess_trace(img, {}, s);
  ASSERT_EQ(trace.stages.size(), 7u);

  const auto cl = oracle::clahe(testing_support::to_oracle(img), 2.0, 8, 8);
  std::vector<double> st1(cl.px.begin(), cl.px.end());
  ASSERT_EQ(trace.stages[1].data.size(), st1.size());
  for (std::size_t i = 0; i < st1.size(); ++i) ASSERT_EQ(trace.stages[1].data[i], st1[i]);

  // 512 wide, 640 tall -> 256 x 320, crop offsets (48, 16).
  const auto st2 = oracle::resize(st1, 640, 512, 320, 256);
  EXPECT_EQ(trace.stages[2].height, 320);
  EXPECT_EQ(trace.stages[2].width, 256);
  for (std::size_t i = 0; i < st2.size(); ++i) ASSERT_NEAR(trace.stages[2].data[i], st2[i], 1e-4);
  EXPECT_EQ(trace.geometry.crop_top, 48);
  EXPECT_EQ(trace.geometry.crop_left, 16);

  std::vector<double> st3;
  for (int y = 48; y < 48 + 224; ++y)
    for (int x = 16; x < 16 + 224; ++x) st3.push_back(st2[static_cast<std::size_t>(y) * 256 + x]);
  const auto [lo, hi] = std::minmax_element(st3.begin(), st3.end());
  const double mn = *lo, mx = *hi;
  for (std::size_t i = 0; i < st3.size(); ++i) {
    const double scaled = (st3[i] - mn) / (mx - mn);
    ASSERT_NEAR(trace.stages[4].data[i], scaled, 1e-5);
    for (int c = 0; c < 3; ++c) {
      ASSERT_EQ(trace.stages[5].data[c * st3.size() + i], trace.stages[4].data[i]);
      ASSERT_NEAR(trace.stages[6].data[c * st3.size() + i], (scaled - s.mean[c]) / s.std[c], 1e-4);
    }
  }
}

TEST(ToU8, RoundsHalfUpAndClamps) {
  EXPECT_EQ(to_u8(2.5), 3);
  EXPECT_EQ(to_u8(2.4999), 2);
  EXPECT_EQ(to_u8(-4.0), 0);
  EXPECT_EQ(to_u8(300.0), 255);
}
