#pragma once

// Resolution-preserving canvas: content goes to the top-left of a zero
// canvas unscaled; only images whose sides exceed the canvas are shrunk
// (aspect ratio kept) so the limiting side fits exactly.

#include "imloc/sample.hpp"

namespace imloc {

struct Canvas {
  std::int64_t height = 1024;
  std::int64_t width = 1024;
};

struct PaddedSample {
  Tensor image;      // (3, H, W)
  MaskTensor mask;   // (1, H, W)
  std::int64_t content_h = 0, content_w = 0;
  std::int64_t orig_h = 0, orig_w = 0;
  std::string source_id;

  bool resized() const { return content_h != orig_h || content_w != orig_w; }
};

/// Content extent after the optional shrink step.
std::pair<std::int64_t, std::int64_t> fitted_extent(std::int64_t h, std::int64_t w, const Canvas& canvas);

/// Throws std::invalid_argument for non-positive dims or a canvas that is not
/// a multiple of `patch_size`.
PaddedSample pad_to_canvas(const Sample& sample, const Canvas& canvas, std::int64_t patch_size = 16);

/// Extracts the content rectangle of a canvas-sized (C, H, W) prediction and,
/// when the sample was shrunk on ingest, resizes it back to (C, orig_h, orig_w).
Tensor crop_to_content(const Tensor& prediction, const PaddedSample& padded);

}  // namespace imloc
