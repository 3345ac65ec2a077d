#include "imloc/morphology.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace imloc {

StructuringElement::StructuringElement(int k) : k_(k), grid_(static_cast<std::size_t>((2 * k + 1) * (2 * k + 1)), 0) {
  for (int i = 0; i < side(); ++i)
    for (int j = 0; j < side(); ++j)
      grid_[static_cast<std::size_t>(i * side() + j)] = (i == k || j == k) ? 1 : 0;
}

StructuringElement StructuringElement::cross(int k) {
  if (k < 0) throw std::invalid_argument("structuring element radius must be non-negative");
  return StructuringElement(k);
}

std::vector<std::pair<int, int>> StructuringElement::offsets() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < side(); ++i)
    for (int j = 0; j < side(); ++j)
      if (at(i, j)) out.emplace_back(i - k_, j - k_);
  return out;
}

namespace {

void check_mask(const MaskTensor& m, const char* what) {
  if (m.rank() != 3) throw ShapeError(std::string(what) + ": expected (C,H,W) mask, got " + shape_str(m.shape()));
}

// The cross is the union of a horizontal and a vertical segment, so
// dilation is the OR of two 1-D dilations and erosion the AND of two 1-D
// erosions. Each 1-D pass uses a running count over a (2k+1) window.
enum class Op { dilate, erode };

void line_pass(const std::uint8_t* src, std::uint8_t* dst, std::int64_t n, std::int64_t stride, int k, Op op) {
  std::int64_t count = 0;
  // count of true samples in [i-k, i+k] intersected with [0, n)
  for (std::int64_t j = 0; j < std::min<std::int64_t>(k, n); ++j) count += src[j * stride] ? 1 : 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (i + k < n) count += src[(i + k) * stride] ? 1 : 0;
    if (i - k - 1 >= 0) count -= src[(i - k - 1) * stride] ? 1 : 0;
    if (op == Op::dilate) {
      dst[i * stride] = count > 0 ? 1 : 0;
    } else {
      const bool inside = i - k >= 0 && i + k < n;
      dst[i * stride] = (inside && count == 2 * k + 1) ? 1 : 0;
    }
  }
}

MaskTensor morph(const MaskTensor& mask, int k, Op op) {
  const auto c = mask.dim(0), h = mask.dim(1), w = mask.dim(2);
  MaskTensor horiz(mask.shape()), vert(mask.shape()), out(mask.shape());
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const std::uint8_t* src = mask.data() + ch * h * w;
    for (std::int64_t y = 0; y < h; ++y) line_pass(src + y * w, horiz.data() + ch * h * w + y * w, w, 1, k, op);
    for (std::int64_t x = 0; x < w; ++x) line_pass(src + x, vert.data() + ch * h * w + x, h, w, k, op);
  }
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = op == Op::dilate ? (horiz[i] | vert[i]) : (horiz[i] & vert[i]);
  }
  return out;
}

}  // namespace

MaskTensor dilate(const MaskTensor& mask, const StructuringElement& se) {
  check_mask(mask, "dilate");
  return morph(mask, se.radius(), Op::dilate);
}

MaskTensor erode(const MaskTensor& mask, const StructuringElement& se) {
  check_mask(mask, "erode");
  return morph(mask, se.radius(), Op::erode);
}

EdgeMask edge_mask(const MaskTensor& mask, int k) {
  if (k < 1) throw std::invalid_argument("edge_mask: k must be >= 1, got " + std::to_string(k));
  const auto se = StructuringElement::cross(k);
  MaskTensor band = dilate(mask, se);
  const MaskTensor eroded = erode(mask, se);
  for (std::int64_t i = 0; i < band.numel(); ++i) band[i] ^= eroded[i];
  return {std::move(band), k};
}

int pick_k(std::int64_t height, std::int64_t width) {
  const double side = static_cast<double>(std::max(height, width));
  return std::max(1, static_cast<int>(std::lround(5.0 * side / 1024.0)));
}

int pick_k(const MaskTensor& mask) {
  check_mask(mask, "pick_k");
  return pick_k(mask.dim(1), mask.dim(2));
}

}  // namespace imloc
