#include <gtest/gtest.h>

#include <fstream>

#include "imloc/augment.hpp"
#include "imloc/dataset.hpp"
#include "imloc/image_io.hpp"
#include "imloc/manifest.hpp"
#include "imloc/synth.hpp"
#include "oracles.hpp"

using namespace imloc;
namespace fs = std::filesystem;

namespace {

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

Sample base_sample(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  return procedural_image(h, w, rng, "base" + std::to_string(seed));
}

// Image whose channels encode the source coordinate of every pixel, so the
// geometric part of an augmentation can be read back from the output.
Sample coordinate_sample(std::int64_t h, std::int64_t w, const MaskTensor& mask) {
  Sample s{Tensor({3, h, w}), mask, "coords"};
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      s.image.at(0, y, x) = static_cast<float>(y) / static_cast<float>(h - 1);
      s.image.at(1, y, x) = static_cast<float>(x) / static_cast<float>(w - 1);
      s.image.at(2, y, x) = 1;
    }
  return s;
}

}  // namespace

class DataFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = oracle::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    const Tensor img = oracle::random_tensor({3, 8, 6}, 1, 0, 1);
    for (int i = 0; i < 4; ++i) write_rgb_png(dir / ("img" + std::to_string(i) + ".png"), img);
    write_mask_png(dir / "m2.png", oracle::rect_mask(8, 6, 1, 1, 4, 4));
    write_mask_png(dir / "m3.png", oracle::rect_mask(8, 6, 2, 0, 8, 3));
  }
  fs::path dir;
};

TEST_F(DataFiles, LoadsFourEntryManifest) {
  write_lines(dir / "m.jsonl",
              {R"({"image_path":"img0.png","mask_path":null,"label":"authentic","split":"train"})",
               R"({"image_path":"img1.png","label":"authentic","split":"test"})", "",
               R"({"image_path":"img2.png","mask_path":"m2.png","label":"manipulated","split":"train"})",
               R"({"image_path":"img3.png","mask_path":"m3.png","label":"manipulated","split":"test"})"});
  const auto m = load_manifest(dir / "m.jsonl");
  ASSERT_EQ(m.size(), 4u);
  const auto c = m.counts();
  EXPECT_EQ(c.authentic, 2u);
  EXPECT_EQ(c.manipulated, 2u);
  EXPECT_EQ(c.train, 2u);
  EXPECT_EQ(c.test, 2u);
  EXPECT_EQ(m.filter(Split::test).size(), 2u);
  EXPECT_TRUE(m.entries[0].image_path.is_absolute());
  const auto s = load_sample(m.entries[2]);
  EXPECT_EQ(s.mask, oracle::rect_mask(8, 6, 1, 1, 4, 4));
  EXPECT_EQ(count_true(load_sample(m.entries[0]).mask), 0);
  EXPECT_EQ(s.source_id, "img2.png");
}

TEST_F(DataFiles, MissingMaskFileNamesTheLine) {
  write_lines(dir / "m.jsonl",
              {R"({"image_path":"img0.png","label":"authentic","split":"train"})",
               R"({"image_path":"img1.png","mask_path":"nope.png","label":"manipulated","split":"train"})"});
  try {
    load_manifest(dir / "m.jsonl");
    FAIL() << "expected ManifestError";
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST_F(DataFiles, ValidationErrors) {
  write_lines(dir / "a.jsonl", {R"({"image_path":"img0.png","label":"manipulated","split":"train"})"});
  EXPECT_THROW(load_manifest(dir / "a.jsonl"), ManifestError);
  write_lines(dir / "b.jsonl", {R"({"image_path":"img0.png","label":"fake","split":"train"})"});
  EXPECT_THROW(load_manifest(dir / "b.jsonl"), ManifestError);
  write_lines(dir / "c.jsonl", {R"({"image_path":"img0.png","label":"authentic","split":"val"})"});
  EXPECT_THROW(load_manifest(dir / "c.jsonl"), ManifestError);
  write_lines(dir / "d.jsonl", {"{not json"});
  EXPECT_THROW(load_manifest(dir / "d.jsonl"), ManifestError);
  write_lines(dir / "e.jsonl", {R"({"image_path":"gone.png","label":"authentic","split":"train"})"});
  EXPECT_THROW(load_manifest(dir / "e.jsonl"), ManifestError);
  EXPECT_THROW(load_manifest(dir / "missing.jsonl"), ManifestError);
}

TEST_F(DataFiles, DecodeMaskThreshold) {
  ByteTensor black({1, 4, 4}), white({1, 4, 4}, 255), checker({1, 5, 6}), edge({1, 1, 2});
  MaskTensor want({1, 5, 6});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      checker.at(0, y, x) = (y + x) % 2 ? 255 : 0;
      want.at(0, y, x) = (y + x) % 2;
    }
  edge[0] = 127;
  edge[1] = 128;
  write_gray_png(dir / "black.png", black);
  write_gray_png(dir / "white.png", white);
  write_gray_png(dir / "checker.png", checker);
  write_gray_png(dir / "edge.png", edge);
  EXPECT_EQ(count_true(decode_mask(dir / "black.png")), 0);
  EXPECT_EQ(count_true(decode_mask(dir / "white.png")), 16);
  EXPECT_EQ(decode_mask(dir / "checker.png"), want);
  const auto e = decode_mask(dir / "edge.png");
  EXPECT_EQ(e[0], 0);
  EXPECT_EQ(e[1], 1);
  Tensor rgb({3, 5, 6});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c) rgb.at(c, y, x) = static_cast<float>(want.at(0, y, x));
  write_rgb_png(dir / "rgbmask.png", rgb);
  EXPECT_EQ(decode_mask(dir / "rgbmask.png"), want);
  EXPECT_THROW(decode_mask(dir / "absent.png"), ImageIoError);
}

TEST_F(DataFiles, ImageRoundTrips) {
  const auto img = oracle::random_tensor({3, 7, 9}, 3, 0, 1);
  write_rgb_png(dir / "x.png", img);
  EXPECT_EQ(read_image(dir / "x.png"), from_bytes(to_bytes(img)));
  EXPECT_LE(max_abs_diff(read_image(dir / "x.png"), img), 0.5f / 255.f + 1e-6f);

  Tensor prob({1, 1, 5}, std::vector<float>{0.f, 0.2f, 0.5f, 0.999f, 1.f});
  write_probability_png(dir / "p.png", prob);
  const auto back = to_bytes(read_image(dir / "p.png"));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(back.at(0, 0, i), std::lround(prob[i] * 255.0));

  const auto m = oracle::random_mask(6, 6, 0.5, 4);
  write_mask_png(dir / "m.png", m);
  const auto raw = to_bytes(read_image(dir / "m.png"));
  for (std::int64_t i = 0; i < 36; ++i) EXPECT_EQ(raw[i], m[i] ? 255 : 0);
  EXPECT_EQ(decode_mask(dir / "m.png"), m);
}

TEST(ImageIo, JpegRoundTrip) {
  Rng rng(1);
  const auto s = procedural_image(32, 32, rng, "j");
  const auto hi = jpeg_round_trip(s.image, 100), lo = jpeg_round_trip(s.image, 5);
  EXPECT_EQ(hi.shape(), s.image.shape());
  EXPECT_LT(max_abs_diff(hi, s.image), max_abs_diff(lo, s.image) + 1e-6f);
  EXPECT_THROW(jpeg_round_trip(s.image, 0), std::invalid_argument);
  EXPECT_THROW(jpeg_round_trip(s.image, 101), std::invalid_argument);
}

TEST(Synth, CopyMoveClonesOneRectangle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto base = base_sample(128, 128, seed);
    Rng rng(seed);
    const auto r = synthesize_tamper(base, TamperKind::copy_move, rng);
    const auto& rect = r.region;
    EXPECT_EQ(r.sample.mask, oracle::rect_mask(128, 128, rect.y, rect.x, rect.y + rect.h, rect.x + rect.w));
    ASSERT_TRUE(r.source.has_value());
    const auto& src = *r.source;
    for (int c = 0; c < 3; ++c)
      for (std::int64_t y = 0; y < 128; ++y)
        for (std::int64_t x = 0; x < 128; ++x) {
          if (rect.contains(y, x)) {
            if (!src.overlaps(rect))
              ASSERT_EQ(r.sample.image.at(c, y, x), base.image.at(c, src.y + y - rect.y, src.x + x - rect.x));
          } else {
            ASSERT_EQ(r.sample.image.at(c, y, x), base.image.at(c, y, x));
          }
        }
  }
}

TEST(Synth, InpaintMaskCountsRectangle) {
  const auto base = base_sample(64, 64, 1);
  Rng rng(3);
  const auto r = synthesize_tamper_at(base, TamperKind::inpaint, Rect{8, 8, 16, 16}, rng);
  EXPECT_EQ(count_true(r.sample.mask), 256);
  EXPECT_EQ(r.sample.mask, oracle::rect_mask(64, 64, 8, 8, 24, 24));
  EXPECT_NE(r.sample.image, base.image);
}

TEST(Synth, SpliceIsDeterministicAndUsesPool) {
  const auto base = base_sample(96, 80, 2);
  std::vector<Sample> pool{base_sample(64, 64, 5), base_sample(100, 100, 6)};
  Rng a(42), b(42);
  const auto x = synthesize_tamper(base, TamperKind::splice, a, pool);
  const auto y = synthesize_tamper(base, TamperKind::splice, b, pool);
  EXPECT_EQ(x.sample.image, y.sample.image);
  EXPECT_EQ(x.sample.mask, y.sample.mask);
  EXPECT_EQ(x.region, y.region);
  Rng c(0);
  EXPECT_THROW(synthesize_tamper(base, TamperKind::splice, c), std::invalid_argument);
}

TEST(Synth, RejectsSmallImages) {
  const auto small = base_sample(31, 64, 1);
  Rng rng(0);
  EXPECT_THROW(synthesize_tamper(small, TamperKind::inpaint, rng), std::invalid_argument);
  EXPECT_THROW(parse_tamper_kind("smudge"), std::invalid_argument);
  EXPECT_EQ(parse_tamper_kind("copy_move"), TamperKind::copy_move);
}

TEST(Synth, AlignmentIsRespected) {
  TamperOptions opts;
  opts.align = 16;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto r = synthesize_tamper(base_sample(128, 128, seed), TamperKind::inpaint, rng, {}, opts);
    EXPECT_EQ(r.region.y % 16, 0);
    EXPECT_EQ(r.region.x % 16, 0);
    EXPECT_EQ(r.region.h % 16, 0);
    EXPECT_EQ(r.region.w % 16, 0);
    EXPECT_GT(r.region.area(), 0);
  }
}

TEST(Synth, DatasetIsReproducibleAndRoundTrips) {
  SynthOptions opts;
  opts.count = 6;
  opts.height = 48;
  opts.width = 40;
  opts.seed = 42;
  opts.authentic_fraction = 0.34;
  opts.test_fraction = 0.5;
  const auto d1 = oracle::temp_dir("synth_a"), d2 = oracle::temp_dir("synth_b");
  const auto m1 = generate_synthetic_dataset(d1, opts);
  const auto m2 = generate_synthetic_dataset(d2, opts);
  ASSERT_EQ(m1.size(), 6u);
  EXPECT_EQ(oracle::read_bytes(d1 / "manifest.jsonl"), oracle::read_bytes(d2 / "manifest.jsonl"));
  for (std::size_t i = 0; i < m1.size(); ++i) {
    EXPECT_EQ(oracle::read_bytes(m1.entries[i].image_path), oracle::read_bytes(m2.entries[i].image_path));
    if (m1.entries[i].mask_path)
      EXPECT_EQ(oracle::read_bytes(*m1.entries[i].mask_path), oracle::read_bytes(*m2.entries[i].mask_path));
  }
  const auto reloaded = load_manifest(d1 / "manifest.jsonl");
  EXPECT_EQ(reloaded.entries, m1.entries);
  const auto c = reloaded.counts();
  EXPECT_GE(c.authentic, 1u);
  EXPECT_GE(c.test, 1u);
  EXPECT_GE(c.train, 1u);
  for (const auto& e : reloaded.entries) {
    const auto s = load_sample(e);
    s.validate();
    EXPECT_EQ(count_true(s.mask) > 0, e.label == Label::manipulated);
  }
  // write then load equals original
  write_manifest(reloaded, d1 / "copy.jsonl");
  EXPECT_EQ(load_manifest(d1 / "copy.jsonl").entries, reloaded.entries);
}

TEST(Augment, IdentityPolicyLeavesSampleUnchanged) {
  const auto s = base_sample(40, 50, 1);
  Rng rng(1);
  const auto a = augment(s, AugmentationPolicy::identity(), rng);
  EXPECT_EQ(a.image, s.image);
  EXPECT_EQ(a.mask, s.mask);
}

TEST(Augment, HorizontalFlipTwiceRestores) {
  auto s = base_sample(40, 50, 2);
  s.mask = oracle::rect_mask(40, 50, 3, 4, 20, 9);
  AugmentationPolicy p;
  p.hflip_prob = 1;
  Rng rng(0);
  const auto once = augment(s, p, rng);
  EXPECT_NE(once.mask, s.mask);
  const auto twice = augment(once, p, rng);
  EXPECT_EQ(twice.image, s.image);
  EXPECT_EQ(twice.mask, s.mask);
}

TEST(Augment, QuarterTurnSwapsRectangleExtents) {
  auto s = base_sample(40, 60, 3);
  s.mask = oracle::rect_mask(40, 60, 5, 10, 15, 40);  // 10 tall, 30 wide
  AugmentationPolicy p;
  p.rot90_prob = 1;
  Rng rng(9);
  const auto a = augment(s, p, rng);
  std::int64_t y0 = 1 << 20, y1 = -1, x0 = 1 << 20, x1 = -1;
  for (std::int64_t y = 0; y < a.height(); ++y)
    for (std::int64_t x = 0; x < a.width(); ++x)
      if (a.mask.at(0, y, x)) {
        y0 = std::min(y0, y), y1 = std::max(y1, y), x0 = std::min(x0, x), x1 = std::max(x1, x);
      }
  EXPECT_EQ(count_true(a.mask), 300);
  const bool odd = a.height() == 60;
  EXPECT_EQ(y1 - y0 + 1, odd ? 30 : 10);
  EXPECT_EQ(x1 - x0 + 1, odd ? 10 : 30);
  // the bounding box is the image of the rectangle corners
  if (odd) {
    // counter-clockwise (y,x)->(W-1-x, y) or clockwise (y,x)->(x, H-1-y)
    const bool ccw = y0 == 60 - 40;
    EXPECT_EQ(y0, ccw ? 60 - 40 : 10);
    EXPECT_EQ(x0, ccw ? 5 : 40 - 15);
  } else {
    EXPECT_EQ(y0, 40 - 15);
    EXPECT_EQ(x0, 60 - 40);
  }
}

TEST(Augment, MaskFollowsGeometry) {
  AugmentationPolicy p;
  p.rescale_prob = 0.5;
  p.hflip_prob = 0.5;
  p.vflip_prob = 0.5;
  p.rot90_prob = 0.5;
  p.small_rotation_prob = 0.5;
  const std::int64_t h = 48, w = 64;
  const Rect rect{10, 12, 20, 30};
  const auto s = coordinate_sample(h, w, oracle::rect_mask(h, w, 10, 12, 30, 42));
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const auto a = augment(s, p, rng);
    ASSERT_TRUE(is_binary(a.mask));
    ASSERT_EQ(a.mask.dim(1), a.height());
    ASSERT_EQ(a.mask.dim(2), a.width());
    // exact transforms must agree everywhere; interpolating ones away
    // from the rectangle outline
    for (std::int64_t y = 0; y < a.height(); ++y)
      for (std::int64_t x = 0; x < a.width(); ++x) {
        if (a.image.at(2, y, x) < 0.999f) {
          if (a.image.at(2, y, x) == 0.f) ASSERT_EQ(a.mask.at(0, y, x), 0);
          continue;
        }
        const double sy = a.image.at(0, y, x) * (h - 1), sx = a.image.at(1, y, x) * (w - 1);
        const auto iy = std::llround(sy), ix = std::llround(sx);
        bool near_outline = false;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            near_outline |= rect.contains(iy + dy, ix + dx) != rect.contains(iy, ix);
        if (near_outline) continue;
        ASSERT_EQ(a.mask.at(0, y, x), rect.contains(iy, ix) ? 1 : 0) << "seed " << seed << " at " << y << "," << x;
      }
  }
}

TEST(Augment, StandardPolicyKeepsInvariants) {
  const auto base = base_sample(64, 64, 4);
  Sample s = base;
  s.mask = oracle::rect_mask(64, 64, 10, 10, 30, 40);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng a(seed), b(seed);
    const auto x = augment(s, AugmentationPolicy::standard(), a);
    const auto y = augment(s, AugmentationPolicy::standard(), b);
    ASSERT_TRUE(is_binary(x.mask));
    ASSERT_EQ(x.mask.dim(1), x.image.dim(1));
    ASSERT_EQ(x.mask.dim(2), x.image.dim(2));
    ASSERT_EQ(x.image, y.image);
    ASSERT_EQ(x.mask, y.mask);
  }
}

TEST(SampleSet, InMemoryAndManifestBacked) {
  std::vector<Sample> v{base_sample(32, 32, 1), base_sample(32, 32, 2)};
  const auto set = SampleSet::from_samples(v, "mem");
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.name(), "mem");
  EXPECT_EQ(set.get(1).image, v[1].image);
  EXPECT_EQ(set.source_id(0), "base1");

  SynthOptions opts;
  opts.count = 4;
  opts.height = opts.width = 32;
  opts.test_fraction = 0.5;
  const auto dir = oracle::temp_dir("sampleset");
  const auto m = generate_synthetic_dataset(dir, opts);
  const auto train = SampleSet::from_manifest(m, Split::train);
  const auto test = SampleSet::from_manifest(m, Split::test, false);
  EXPECT_EQ(train.size() + test.size(), 4u);
  EXPECT_EQ(SampleSet::from_manifest(m, std::nullopt).size(), 4u);
  EXPECT_EQ(train.get(0).image, train.get(0).image);
  EXPECT_EQ(test.get(0).image, load_sample(m.filter(Split::test).entries[0]).image);
}
