#pragma once

#include <string>

#include "imloc/tensor.hpp"

namespace imloc {

/// RGB image (3, h, w) in [0, 1] with its binary manipulation mask (1, h, w).
struct Sample {
  Tensor image;
  MaskTensor mask;
  std::string source_id;

  std::int64_t height() const { return image.dim(1); }
  std::int64_t width() const { return image.dim(2); }
  /// Throws ShapeError unless image is (3,h,w), mask is (1,h,w) and binary.
  void validate() const;
};

}  // namespace imloc
