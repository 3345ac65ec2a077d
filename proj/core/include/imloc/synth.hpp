#pragma once

// Synthetic tampering so the pipeline runs without licensed datasets.

#include <filesystem>
#include <optional>
#include <span>

#include "imloc/manifest.hpp"
#include "imloc/rng.hpp"
#include "imloc/sample.hpp"

namespace imloc {

enum class TamperKind { copy_move, splice, inpaint };

std::string to_string(TamperKind k);
TamperKind parse_tamper_kind(const std::string& s);

struct Rect {
  std::int64_t y = 0, x = 0, h = 0, w = 0;

  std::int64_t area() const { return h * w; }
  bool contains(std::int64_t py, std::int64_t px) const { return py >= y && py < y + h && px >= x && px < x + w; }
  bool overlaps(const Rect& o) const { return y < o.y + o.h && o.y < y + h && x < o.x + o.w && o.x < x + w; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct TamperOptions {
  double min_side_fraction = 0.2;
  double max_side_fraction = 0.45;
  /// Rectangle corners and sides are multiples of this.
  std::int64_t align = 1;
  double inpaint_noise = 0.03;
};

struct TamperResult {
  Sample sample;
  Rect region;                 // altered rectangle
  std::optional<Rect> source;  // copy-move source (same image) or splice donor rect
};

/// Alters a random rectangle. The returned mask is the base mask OR'ed with
/// the rectangle. Splicing draws its donor from `pool`. Throws
/// std::invalid_argument for images under 32x32 or an empty splice pool.
TamperResult synthesize_tamper(const Sample& base, TamperKind kind, Rng& rng,
                               std::span<const Sample> pool = {}, const TamperOptions& opts = {});
/// Same with a caller-chosen target rectangle.
TamperResult synthesize_tamper_at(const Sample& base, TamperKind kind, const Rect& region, Rng& rng,
                                  std::span<const Sample> pool = {}, const TamperOptions& opts = {});

/// Smooth textured RGB image with an all-false mask.
Sample procedural_image(std::int64_t height, std::int64_t width, Rng& rng, std::string source_id);

struct SynthOptions {
  std::size_t count = 16;
  std::int64_t height = 128;
  std::int64_t width = 128;
  std::uint64_t seed = 0;
  double authentic_fraction = 0.0;
  double test_fraction = 0.0;
  TamperOptions tamper{};
};

/// Writes images/, masks/ and manifest.jsonl under `out_dir`, returns the
/// manifest as written. Tamper kinds cycle copy-move, splice, inpaint.
DatasetManifest generate_synthetic_dataset(const std::filesystem::path& out_dir, const SynthOptions& opts);

}  // namespace imloc
