#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "imloc/viz.hpp"
#include "oracles.hpp"

using namespace imloc;

namespace {

ByteTensor ref_feature_map(const Tensor& chw) {
  const auto c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  std::vector<double> m(static_cast<std::size_t>(h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      double s = 0;
      for (std::int64_t k = 0; k < c; ++k) s += chw.at(k, y, x);
      m[static_cast<std::size_t>(y * w + x)] = s / static_cast<double>(c);
    }
  const double lo = *std::min_element(m.begin(), m.end()), hi = *std::max_element(m.begin(), m.end());
  ByteTensor out(Shape{1, h, w});
  for (std::size_t i = 0; i < m.size(); ++i)
    out[static_cast<std::int64_t>(i)] =
        hi > lo ? static_cast<std::uint8_t>(std::lround((m[i] - lo) / (hi - lo) * 255.0)) : 128;
  return out;
}

bool has_color(const Tensor& img, const std::array<float, 3>& c) {
  const auto hw = img.dim(1) * img.dim(2);
  for (std::int64_t i = 0; i < hw; ++i)
    if (img[i] == c[0] && img[hw + i] == c[1] && img[2 * hw + i] == c[2]) return true;
  return false;
}

}  // namespace

TEST(FeatureMapViz, MatchesReference) {
  for (std::uint32_t seed = 0; seed < 5; ++seed) {
    const auto t = oracle::random_tensor({1 + seed, 7, 9 + seed}, seed, -3, 5);
    const auto v = visualize_feature_map(t);
    ASSERT_EQ(v.shape(), (Shape{1, 7, 9 + seed}));
    EXPECT_EQ(v, ref_feature_map(t)) << seed;
    EXPECT_EQ(*std::min_element(v.storage().begin(), v.storage().end()), 0);
    EXPECT_EQ(*std::max_element(v.storage().begin(), v.storage().end()), 255);
  }
}

TEST(FeatureMapViz, ConstantMapIsMidGray) {
  const auto v = visualize_feature_map(Tensor(Shape{4, 5, 6}, -2.5f));
  for (auto b : v.storage()) EXPECT_EQ(b, 128);
  // Channels that cancel in the mean also count as constant.
  Tensor t(Shape{2, 3, 3});
  for (std::int64_t i = 0; i < 9; ++i) {
    t[i] = static_cast<float>(i);
    t[9 + i] = -static_cast<float>(i);
  }
  const auto c = visualize_feature_map(t);
  for (auto b : c.storage()) EXPECT_EQ(b, 128);
}

TEST(FeatureMapViz, FeatureMapOverloadAndErrors) {
  const auto t = oracle::random_tensor({3, 4, 4}, 9);
  FeatureMap fm{ag::constant(t), 4};
  EXPECT_EQ(visualize_feature_map(fm), visualize_feature_map(t));
  EXPECT_THROW(visualize_feature_map(Tensor(Shape{4, 4})), ShapeError);
}

TEST(Overlay, BlendsOnlyAboveThreshold) {
  const auto img = oracle::random_tensor({3, 4, 5}, 1, 0, 1);
  auto prob = oracle::random_tensor({1, 4, 5}, 2, 0, 1);
  prob[0] = 0.5f;
  const double alpha = 0.4;
  const auto out = overlay_prediction(img, prob, 0.5, alpha);
  const std::int64_t hw = 20;
  for (std::int64_t i = 0; i < hw; ++i) {
    const bool on = prob[i] >= 0.5f;
    const float a = static_cast<float>(alpha);
    EXPECT_FLOAT_EQ(out[i], on ? (1 - a) * img[i] + a : img[i]);
    EXPECT_FLOAT_EQ(out[hw + i], on ? (1 - a) * img[hw + i] : img[hw + i]);
    EXPECT_FLOAT_EQ(out[2 * hw + i], on ? (1 - a) * img[2 * hw + i] : img[2 * hw + i]);
  }
  EXPECT_EQ(overlay_prediction(img, prob, 0.5, 0.0), img);
  EXPECT_THROW(overlay_prediction(img, Tensor(Shape{1, 4, 4}), 0.5), ShapeError);
  EXPECT_THROW(overlay_prediction(Tensor(Shape{1, 4, 5}), prob, 0.5), ShapeError);
}

TEST(Plot, DimensionsRangeAndSeriesInk) {
  PlotSeries s;
  s.x = {0, 1, 2, 3};
  s.y = {0.2, 0.8, 0.5, 0.9};
  s.color = {0.9f, 0.1f, 0.2f};
  PlotOptions o;
  o.width = 320;
  o.height = 200;
  const auto img = render_plot({s}, o);
  ASSERT_EQ(img.shape(), (Shape{3, 200, 320}));
  for (float v : img.storage()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_EQ(img.at(0, 0, 0), 1.0f);
  EXPECT_EQ(img.at(2, 199, 319), 1.0f);
  EXPECT_TRUE(has_color(img, s.color));
  EXPECT_EQ(render_plot({s}, o), img);
}

TEST(Plot, EmptyAndInvalidInput) {
  EXPECT_EQ(render_plot({}).shape(), (Shape{3, 480, 640}));
  PlotSeries bad;
  bad.x = {0, 1};
  bad.y = {0};
  EXPECT_THROW(render_plot({bad}), std::invalid_argument);
  PlotOptions tiny;
  tiny.width = 50;
  EXPECT_THROW(render_plot({}, tiny), std::invalid_argument);
}
