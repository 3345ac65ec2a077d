#include "imloc/synth.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "imloc/image_io.hpp"

namespace imloc {

namespace fs = std::filesystem;

std::string to_string(TamperKind k) {
  switch (k) {
    case TamperKind::copy_move: return "copy_move";
    case TamperKind::splice: return "splice";
    case TamperKind::inpaint: return "inpaint";
  }
  return "unknown";
}

TamperKind parse_tamper_kind(const std::string& s) {
  if (s == "copy_move" || s == "copy-move") return TamperKind::copy_move;
  if (s == "splice") return TamperKind::splice;
  if (s == "inpaint") return TamperKind::inpaint;
  throw std::invalid_argument("unknown tamper kind '" + s + "'");
}

namespace {

constexpr std::int64_t kMinSide = 32;

std::int64_t align_down(std::int64_t v, std::int64_t a) { return v / a * a; }

Rect random_rect(std::int64_t h, std::int64_t w, Rng& rng, const TamperOptions& o) {
  const auto a = std::max<std::int64_t>(1, o.align);
  auto side = [&](std::int64_t n) {
    auto lo = std::max<std::int64_t>(a, align_down(static_cast<std::int64_t>(o.min_side_fraction * static_cast<double>(n)), a));
    auto hi = std::max(lo, align_down(static_cast<std::int64_t>(o.max_side_fraction * static_cast<double>(n)), a));
    return align_down(rng.uniform_int(lo, hi), a);
  };
  Rect r;
  r.h = side(h);
  r.w = side(w);
  r.y = align_down(rng.uniform_int(0, h - r.h), a);
  r.x = align_down(rng.uniform_int(0, w - r.w), a);
  return r;
}

Rect random_placement(std::int64_t h, std::int64_t w, std::int64_t rh, std::int64_t rw, Rng& rng, std::int64_t align) {
  const auto a = std::max<std::int64_t>(1, align);
  return {align_down(rng.uniform_int(0, h - rh), a), align_down(rng.uniform_int(0, w - rw), a), rh, rw};
}

void copy_region(const Tensor& src, const Rect& from, Tensor& dst, const Rect& to) {
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < to.h; ++y)
      for (std::int64_t x = 0; x < to.w; ++x) dst.at(c, to.y + y, to.x + x) = src.at(c, from.y + y, from.x + x);
}

}  // namespace

TamperResult synthesize_tamper(const Sample& base, TamperKind kind, Rng& rng, std::span<const Sample> pool,
                               const TamperOptions& opts) {
  if (base.height() < kMinSide || base.width() < kMinSide) {
    throw std::invalid_argument("synthesize_tamper: image must be at least 32x32, got " +
                                std::to_string(base.height()) + "x" + std::to_string(base.width()));
  }
  const Rect region = random_rect(base.height(), base.width(), rng, opts);
  return synthesize_tamper_at(base, kind, region, rng, pool, opts);
}

TamperResult synthesize_tamper_at(const Sample& base, TamperKind kind, const Rect& region, Rng& rng,
                                  std::span<const Sample> pool, const TamperOptions& opts) {
  base.validate();
  const auto h = base.height(), w = base.width();
  if (h < kMinSide || w < kMinSide) {
    throw std::invalid_argument("synthesize_tamper: image must be at least 32x32");
  }
  if (region.h <= 0 || region.w <= 0 || region.y < 0 || region.x < 0 || region.y + region.h > h ||
      region.x + region.w > w) {
    throw std::invalid_argument("synthesize_tamper: region outside the image");
  }
  TamperResult out;
  out.sample = base;
  out.region = region;
  Tensor& img = out.sample.image;
  switch (kind) {
    case TamperKind::copy_move: {
      // Prefer a source that does not overlap the target.
      Rect src = random_placement(h, w, region.h, region.w, rng, opts.align);
      for (int tries = 0; tries < 64 && src.overlaps(region); ++tries) {
        src = random_placement(h, w, region.h, region.w, rng, opts.align);
      }
      copy_region(base.image, src, img, region);
      out.source = src;
      break;
    }
    case TamperKind::splice: {
      if (pool.empty()) throw std::invalid_argument("synthesize_tamper: splice needs a donor pool");
      std::vector<std::size_t> fits;
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool[i].height() >= region.h && pool[i].width() >= region.w) fits.push_back(i);
      if (fits.empty()) throw std::invalid_argument("synthesize_tamper: no donor large enough");
      const Sample& donor = pool[fits[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(fits.size()) - 1))]];
      const Rect src = random_placement(donor.height(), donor.width(), region.h, region.w, rng, opts.align);
      copy_region(donor.image, src, img, region);
      out.source = src;
      break;
    }
    case TamperKind::inpaint: {
      // Mean colour of a 4-pixel ring around the region, plus noise.
      double mean[3] = {0, 0, 0};
      std::int64_t n = 0;
      const std::int64_t ring = 4;
      for (auto y = std::max<std::int64_t>(0, region.y - ring); y < std::min(h, region.y + region.h + ring); ++y)
        for (auto x = std::max<std::int64_t>(0, region.x - ring); x < std::min(w, region.x + region.w + ring); ++x) {
          if (region.contains(y, x)) continue;
          for (int c = 0; c < 3; ++c) mean[c] += base.image.at(c, y, x);
          ++n;
        }
      for (double& m : mean) m = n ? m / static_cast<double>(n) : 0.5;
      for (std::int64_t y = 0; y < region.h; ++y)
        for (std::int64_t x = 0; x < region.w; ++x)
          for (int c = 0; c < 3; ++c) {
            const double v = mean[c] + opts.inpaint_noise * rng.normal();
            img.at(c, region.y + y, region.x + x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
      break;
    }
  }
  for (std::int64_t y = 0; y < region.h; ++y)
    for (std::int64_t x = 0; x < region.w; ++x) out.sample.mask.at(0, region.y + y, region.x + x) = 1;
  return out;
}

Sample procedural_image(std::int64_t height, std::int64_t width, Rng& rng, std::string source_id) {
  Sample s;
  s.source_id = std::move(source_id);
  s.image = Tensor(Shape{3, height, width});
  s.mask = MaskTensor(Shape{1, height, width});
  struct Wave {
    double fy, fx, phase, amp[3];
  };
  std::vector<Wave> waves(4);
  for (auto& wv : waves) {
    const double freq = rng.uniform(0.02, 0.25);
    const double ang = rng.uniform(0.0, std::numbers::pi);
    wv.fy = freq * std::sin(ang);
    wv.fx = freq * std::cos(ang);
    wv.phase = rng.uniform(0.0, 2 * std::numbers::pi);
    for (double& a : wv.amp) a = rng.uniform(-0.15, 0.15);
  }
  double base_col[3], grad_y[3], grad_x[3];
  for (int c = 0; c < 3; ++c) {
    base_col[c] = rng.uniform(0.25, 0.75);
    grad_y[c] = rng.uniform(-0.2, 0.2);
    grad_x[c] = rng.uniform(-0.2, 0.2);
  }
  for (std::int64_t y = 0; y < height; ++y)
    for (std::int64_t x = 0; x < width; ++x) {
      const double ny = static_cast<double>(y) / static_cast<double>(height) - 0.5;
      const double nx = static_cast<double>(x) / static_cast<double>(width) - 0.5;
      for (int c = 0; c < 3; ++c) {
        double v = base_col[c] + grad_y[c] * ny + grad_x[c] * nx;
        for (const auto& wv : waves)
          v += wv.amp[c] * std::sin(wv.fy * static_cast<double>(y) + wv.fx * static_cast<double>(x) + wv.phase);
        v += 0.01 * rng.normal();
        s.image.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return s;
}

DatasetManifest generate_synthetic_dataset(const fs::path& out_dir, const SynthOptions& opts) {
  if (opts.count == 0) throw std::invalid_argument("synthetic dataset needs count >= 1");
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  Rng root(opts.seed);
  auto name = [](const char* prefix, std::size_t i) {
    std::ostringstream os;
    os << prefix << std::setw(4) << std::setfill('0') << i << ".png";
    return os.str();
  };
  std::vector<Sample> bases;
  bases.reserve(opts.count);
  for (std::size_t i = 0; i < opts.count; ++i) {
    Rng r = root.derive("base").derive(i);
    bases.push_back(procedural_image(opts.height, opts.width, r, name("img_", i)));
    // Store exactly what the PNG will hold.
    bases.back().image = from_bytes(to_bytes(bases.back().image));
  }
  const auto n_auth = static_cast<std::size_t>(std::llround(opts.authentic_fraction * static_cast<double>(opts.count)));
  const auto n_test = static_cast<std::size_t>(std::llround(opts.test_fraction * static_cast<double>(opts.count)));
  DatasetManifest manifest;
  std::size_t kind_i = 0;
  auto split_of = [&](std::size_t i) { return i >= opts.count - n_test ? Split::test : Split::train; };
  for (std::size_t i = 0; i < opts.count; ++i) {
    ManifestEntry e;
    e.split = split_of(i);
    e.image_path = fs::absolute(out_dir / "images" / name("img_", i));
    Sample s = bases[i];
    if (i < n_auth) {
      e.label = Label::authentic;
    } else {
      e.label = Label::manipulated;
      const auto kind = static_cast<TamperKind>(kind_i++ % 3);
      std::vector<Sample> pool;
      for (std::size_t j = 0; j < bases.size(); ++j)
        if (j != i && split_of(j) == e.split) pool.push_back(bases[j]);
      Rng r = root.derive("tamper").derive(i);
      s = synthesize_tamper(bases[i], kind, r, pool, opts.tamper).sample;
      e.mask_path = fs::absolute(out_dir / "masks" / name("mask_", i));
      write_mask_png(*e.mask_path, s.mask);
    }
    write_rgb_png(e.image_path, s.image);
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace imloc
