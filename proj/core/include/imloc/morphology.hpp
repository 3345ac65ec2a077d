#pragma once

// Binary morphology with a cross-shaped structuring element and the
// boundary-band mask used for edge supervision. Pixels outside the image
// count as authentic (false) for both operators.

#include <cstdint>
#include <vector>

#include "imloc/tensor.hpp"

namespace imloc {

/// (2k+1) x (2k+1) cross: grid[i][j] == 1 iff i == k or j == k.
class StructuringElement {
 public:
  static StructuringElement cross(int k);

  int radius() const noexcept { return k_; }
  int side() const noexcept { return 2 * k_ + 1; }
  bool at(int i, int j) const { return grid_.at(static_cast<std::size_t>(i * side() + j)) != 0; }
  /// (dy, dx) offsets of the set cells relative to the center.
  std::vector<std::pair<int, int>> offsets() const;

 private:
  explicit StructuringElement(int k);
  int k_;
  std::vector<std::uint8_t> grid_;
};

MaskTensor dilate(const MaskTensor& mask, const StructuringElement& se);
MaskTensor erode(const MaskTensor& mask, const StructuringElement& se);

struct EdgeMask {
  MaskTensor data;
  int k = 0;
};

/// |erode(M) - dilate(M)|, i.e. XOR of the two, with a cross of radius k.
/// Throws std::invalid_argument when k < 1.
EdgeMask edge_mask(const MaskTensor& mask, int k);

/// Band radius for an (h, w) mask: max(1, round(5 * max(h, w) / 1024)).
int pick_k(std::int64_t height, std::int64_t width);
int pick_k(const MaskTensor& mask);

}  // namespace imloc
