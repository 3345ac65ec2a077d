#include <gtest/gtest.h>

#include <cmath>

#include "imloc/loss.hpp"
#include "imloc/model.hpp"
#include "imloc/morphology.hpp"
#include "oracles.hpp"

using namespace imloc;

namespace {

ModelConfig small_cfg() {
  ModelConfig c;
  c.embed_dim = 32;
  c.depth = 2;
  c.num_heads = 2;
  c.window_size = 2;
  c.global_block_indexes = {1};
  c.canvas_h = c.canvas_w = 64;
  c.pyramid_channels = 16;
  c.head.decoder_dim = 16;
  return c;
}

Tensor image_for(const ModelConfig& c, std::uint32_t seed) {
  return oracle::random_tensor({3, c.canvas_h, c.canvas_w}, seed, 0, 1);
}

void set_all(ParameterStore& store, const std::string& prefix, float v) {
  for (auto& e : store.entries())
    if (e.name.rfind(prefix, 0) == 0) e.var.mutable_value().fill(v);
}

}  // namespace

TEST(Config, PresetsValidate) {
  EXPECT_NO_THROW(ModelConfig::vit_base().validate());
  EXPECT_NO_THROW(ModelConfig::toy().validate());
  EXPECT_EQ(ModelConfig::vit_base().grid_h(), 64);
  EXPECT_EQ(ModelConfig::preset("toy").canvas_h, 128);
  EXPECT_THROW(ModelConfig::preset("huge"), std::invalid_argument);
  auto c = small_cfg();
  c.canvas_h = 72;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_cfg();
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_cfg();
  c.global_block_indexes = {5};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  nlohmann::json j = ModelConfig::toy();
  EXPECT_EQ(j.get<ModelConfig>().global_block_indexes, ModelConfig::toy().global_block_indexes);
  EXPECT_EQ(j.get<ModelConfig>().head.norm_kind, ModelConfig::toy().head.norm_kind);
}

TEST(Backbone, PatchEmbedShapes) {
  const auto c = small_cfg();
  Model m(c, 1);
  EXPECT_EQ(m.backbone().patch_embed(image_for(c, 1)).shape(), (Shape{16, 32}));
  EXPECT_THROW(patchify(Tensor({3, 60, 64}), 16), ShapeError);
  EXPECT_THROW(m.backbone().patch_embed(Tensor({3, 128, 128})), ShapeError);
}

TEST(Backbone, PatchifyOrdering) {
  const auto img = oracle::random_tensor({3, 32, 48}, 2);
  const auto p = patchify(img, 16);
  ASSERT_EQ(p.shape(), (Shape{6, 768}));
  // token 4 is grid (1, 1); column (c, dy, dx)
  EXPECT_EQ(p[4 * 768 + (2 * 16 + 3) * 16 + 5], img.at(2, 16 + 3, 16 + 5));
}

TEST(Backbone, ZeroImageGivesProjectionBias) {
  const auto c = small_cfg();
  Model m(c, 1);
  set_all(m.parameters(), "pos_embed", 0);
  auto& bias = m.parameters().find("patch_embed.proj.bias")->var.mutable_value();
  for (std::int64_t i = 0; i < bias.numel(); ++i) bias[i] = 0.01f * static_cast<float>(i);
  const auto t = m.backbone().patch_embed(Tensor({3, 64, 64})).value();
  for (std::int64_t r = 0; r < 16; ++r)
    for (std::int64_t i = 0; i < 32; ++i) ASSERT_EQ(t[r * 32 + i], bias[i]);
}

TEST(Backbone, WindowLayouts) {
  const auto a = ag::window_layout(64, 64, 14);
  EXPECT_EQ(a.padded_h, 70);
  EXPECT_EQ(a.num_windows(), 25);
  const auto b = ag::window_layout(14, 14, 14);
  EXPECT_EQ(b.padded_h, 14);
  EXPECT_EQ(b.num_windows(), 1);
  const auto t = oracle::random_tensor({64 * 64, 3}, 3);
  EXPECT_EQ(ag::window_unpartition(ag::window_partition(ag::constant(t), a), a).value(), t);
}

TEST(Backbone, WindowCoveringGridEqualsGlobal) {
  auto c = small_cfg();
  c.window_size = 4;  // grid is 4x4
  Model m(c, 2);
  const auto x = m.backbone().patch_embed(image_for(c, 4));
  for (std::size_t b = 0; b < 2; ++b) {
    const auto w = m.backbone().attention_block(b, x, AttentionMode::windowed).value();
    const auto g = m.backbone().attention_block(b, x, AttentionMode::global).value();
    EXPECT_LT(max_abs_diff(w, g), 1e-5f);
  }
  auto cw = c, cg = c;
  cw.global_block_indexes = {};
  cg.global_block_indexes = {0, 1};
  Model mw(cw, 0), mg(cg, 0);
  mw.copy_weights_from(m);
  mg.copy_weights_from(m);
  EXPECT_LT(max_abs_diff(mw.backbone().encode(image_for(c, 5)).value(), mg.backbone().encode(image_for(c, 5)).value()),
            1e-5f);
}

TEST(Backbone, WindowedDiffersWhenWindowIsSmaller) {
  const auto c = small_cfg();  // window 2 on a 4x4 grid
  Model m(c, 2);
  const auto x = m.backbone().patch_embed(image_for(c, 4));
  EXPECT_GT(max_abs_diff(m.backbone().attention_block(0, x, AttentionMode::windowed).value(),
                         m.backbone().attention_block(0, x, AttentionMode::global).value()),
            1e-6f);
  EXPECT_EQ(m.backbone().block_mode(0), AttentionMode::windowed);
  EXPECT_EQ(m.backbone().block_mode(1), AttentionMode::global);
}

TEST(Backbone, EqualTokensGiveEqualOutputsAndRowsSumToOne) {
  const auto c = small_cfg();
  Model m(c, 3);
  auto t = oracle::random_tensor({16, 32}, 6);
  for (int i = 0; i < 32; ++i) t[32 + i] = t[i];
  Tensor probs;
  const auto y = m.backbone().attention_block(1, ag::constant(t), AttentionMode::global, &probs).value();
  for (int i = 0; i < 32; ++i) EXPECT_EQ(y[i], y[32 + i]);
  const auto seq = probs.dim(3);
  for (std::int64_t r = 0; r < probs.numel() / seq; ++r) {
    double s = 0;
    for (std::int64_t j = 0; j < seq; ++j) s += probs[r * seq + j];
    ASSERT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Backbone, EncodeShapes) {
  const auto c = small_cfg();
  Model m(c, 1);
  const auto fm = m.backbone().encode(image_for(c, 7));
  EXPECT_EQ(fm.data.shape(), (Shape{32, 4, 4}));
  EXPECT_EQ(fm.stride, 16);
  Model t(ModelConfig::toy(), 1);
  EXPECT_EQ(t.backbone().encode(image_for(ModelConfig::toy(), 7)).data.shape(), (Shape{64, 8, 8}));
}

TEST(Backbone, ParameterCountIgnoresCanvasExceptPositions) {
  auto a = small_cfg(), b = small_cfg();
  b.canvas_h = 128;
  b.canvas_w = 192;
  Model ma(a, 0), mb(b, 0);
  const auto pa = ma.parameters().find("pos_embed")->var.value().numel();
  const auto pb = mb.parameters().find("pos_embed")->var.value().numel();
  EXPECT_EQ(pb, 8 * 12 * 32);
  EXPECT_EQ(ma.parameters().parameter_count() - pa, mb.parameters().parameter_count() - pb);
}

TEST(Pyramid, Shapes) {
  const auto c = small_cfg();
  Model m(c, 1);
  const auto p = m.pyramid().build(m.backbone().encode(image_for(c, 8)));
  ASSERT_EQ(p.maps.size(), 5u);
  const std::int64_t sides[] = {16, 8, 4, 2, 1};
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(p.maps[j].data.shape(), (Shape{16, sides[j], sides[j]}));
    EXPECT_EQ(p.maps[j].stride, kPyramidStrides[j]);
  }
}

TEST(Pyramid, ShapesForOtherCanvases) {
  for (std::int64_t side : {128, 192}) {
    auto c = small_cfg();
    c.canvas_h = side;
    c.canvas_w = 256;
    Model m(c, 1);
    const auto p = m.pyramid().build(m.backbone().encode(image_for(c, 9)));
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_EQ(p.maps[j].height(), side / kPyramidStrides[j]);
      EXPECT_EQ(p.maps[j].width(), 256 / kPyramidStrides[j]);
    }
  }
}

TEST(Pyramid, ZeroInputZeroBiasesGivesZeros) {
  const auto c = small_cfg();
  Model m(c, 1);
  const FeatureMap zero{ag::constant(Tensor({32, 4, 4})), 16};
  for (const auto& fm : m.pyramid().build(zero).maps)
    for (auto v : fm.value().storage()) ASSERT_EQ(v, 0.f);
}

TEST(Pyramid, BranchesAreIndependent) {
  const auto c = small_cfg();
  Model m(c, 1);
  const auto ge = m.backbone().encode(image_for(c, 10));
  const auto before = m.pyramid().build(ge);
  for (auto& e : m.parameters().entries())
    if (e.name.rfind("sfpn.scale4.", 0) == 0)
      for (auto& v : e.var.mutable_value().storage()) v += 0.37f;
  const auto after = m.pyramid().build(ge);
  EXPECT_NE(before.maps[0].value(), after.maps[0].value());
  for (std::size_t j = 1; j < 5; ++j) EXPECT_EQ(before.maps[j].value(), after.maps[j].value());
}

TEST(Pyramid, ChannelMismatchThrows) {
  Model m(small_cfg(), 1);
  EXPECT_THROW(m.pyramid().build(FeatureMap{ag::constant(Tensor({8, 4, 4})), 16}), ShapeError);
}

TEST(Head, LogitShapes) {
  Model t(ModelConfig::toy(), 1);
  const auto f = t.forward(image_for(ModelConfig::toy(), 11), false);
  EXPECT_EQ(f.logits.shape(), (Shape{1, 32, 32}));
  EXPECT_EQ(f.logits_full.shape(), (Shape{1, 128, 128}));
}

TEST(Head, DegenerateAffineCase) {
  for (auto kind : {NormKind::none, NormKind::layer, NormKind::batch}) {
    auto c = small_cfg();
    c.head.norm_kind = kind;
    Model m(c, 1);
    set_all(m.parameters(), "head.linear_c", 0);
    set_all(m.parameters(), "head.fuse.", 0);
    set_all(m.parameters(), "head.pred.weight", 0);
    set_all(m.parameters(), "head.pred.bias", 0.75f);
    PyramidFeatures zero;
    for (std::int64_t s : {16, 8, 4, 2, 1}) zero.maps.push_back({ag::constant(Tensor({16, s, s})), 64 / s});
    const auto l = m.head().predict(zero, false).value();
    for (auto v : l.storage()) ASSERT_EQ(v, 0.75f);
    const auto p = sigmoid(l);
    EXPECT_NEAR(p[0], 1 / (1 + std::exp(-0.75)), 1e-7);
  }
}

TEST(Head, EveryLevelIsLive) {
  const auto c = small_cfg();
  Model m(c, 1);
  const auto pyr = m.pyramid().build(m.backbone().encode(image_for(c, 12)));
  const auto base = m.head().predict(pyr, false).value();
  for (int j = 0; j < 5; ++j) {
    auto& w = m.parameters().find("head.linear_c" + std::to_string(j) + ".weight")->var.mutable_value();
    const Tensor saved = w;
    w.fill(0);
    EXPECT_GT(max_abs_diff(m.head().predict(pyr, false).value(), base), 0.f) << "level " << j;
    w = saved;
  }
}

TEST(Head, BatchNormInferenceIsDeterministic) {
  auto c = small_cfg();
  c.head.norm_kind = NormKind::batch;
  Model m(c, 1);
  const auto img = image_for(c, 13);
  m.forward(img, true);  // moves running statistics
  const auto rm = m.parameters().find("head.fuse_norm.running_mean")->var.value();
  const auto a = m.predict_canvas(img), b = m.predict_canvas(img);
  EXPECT_EQ(a, b);
  EXPECT_EQ(m.parameters().find("head.fuse_norm.running_mean")->var.value(), rm);
  for (auto v : a.storage()) {
    ASSERT_GT(v, 0.f);
    ASSERT_LT(v, 1.f);
  }
}

TEST(Head, LevelCountMismatchThrows) {
  Model m(small_cfg(), 1);
  PyramidFeatures p;
  p.maps.push_back({ag::constant(Tensor({16, 16, 16})), 4});
  EXPECT_THROW(m.head().predict(p, false), ShapeError);
}

TEST(Upsample, ConstantAndRamp) {
  const auto c = upsample_full(ag::constant(Tensor({1, 3, 5}, 0.3f)), 12, 20).value();
  EXPECT_LT(max_abs_diff(c, Tensor({1, 12, 20}, 0.3f)), 1e-7f);
  const auto r = upsample_full(ag::constant(Tensor({1, 2, 2}, std::vector<float>{0, 1, 0, 1})), 4, 4).value();
  const float want[] = {0, 0.25f, 0.75f, 1};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(r.at(0, y, x), want[x], 1e-7);
}

TEST(Upsample, AveragePoolRoundTrip) {
  Tensor s({1, 16, 16});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) s.at(0, y, x) = std::sin(0.05f * y) * std::cos(0.04f * x);
  const auto u = upsample_full(ag::constant(s), 64, 64).value();
  double worst = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      double a = 0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a += u.at(0, 4 * y + i, 4 * x + j);
      worst = std::max(worst, std::abs(a / 16 - s.at(0, y, x)));
    }
  EXPECT_LT(worst, 1e-2);
}

TEST(Model, EveryParameterGetsGradient) {
  for (auto kind : {NormKind::batch, NormKind::none}) {
    auto c = small_cfg();
    c.head.norm_kind = kind;
    Model m(c, 4);
    const auto mask = oracle::rect_mask(64, 64, 10, 12, 40, 50);
    const auto f = m.forward(image_for(c, 14), true);
    auto loss = combined_loss(f.logits_full, mask, edge_mask(mask, 1), LossConfig{});
    ag::backward(loss);
    for (const auto& e : m.parameters().entries()) {
      if (e.kind == ParameterStore::Kind::buffer) continue;
      ASSERT_TRUE(e.var.has_grad()) << e.name;
      double s = 0;
      for (auto v : e.var.grad().storage()) s += std::abs(v);
      EXPECT_GT(s, 0.0) << e.name;
    }
  }
}

TEST(Model, PredictCropsToOriginal) {
  const auto c = small_cfg();
  Model m(c, 1);
  Sample s{oracle::random_tensor({3, 40, 30}, 15, 0, 1), MaskTensor({1, 40, 30}), "x"};
  const auto p = m.predict(pad_to_canvas(s, m.canvas()));
  EXPECT_EQ(p.shape(), (Shape{1, 40, 30}));
  Model other(c, 99);
  EXPECT_NE(other.predict_canvas(image_for(c, 1)), m.predict_canvas(image_for(c, 1)));
  other.copy_weights_from(m);
  EXPECT_EQ(other.predict_canvas(image_for(c, 1)), m.predict_canvas(image_for(c, 1)));
  Model seeded(c, 1);
  EXPECT_EQ(seeded.predict_canvas(image_for(c, 1)), m.predict_canvas(image_for(c, 1)));
}
