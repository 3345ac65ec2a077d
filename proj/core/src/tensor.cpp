#include "imloc/tensor.hpp"

#include <cmath>

namespace imloc {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

bool is_binary(const MaskTensor& m) {
  return std::all_of(m.storage().begin(), m.storage().end(), [](std::uint8_t v) { return v <= 1; });
}

std::int64_t count_true(const MaskTensor& m) {
  return std::count_if(m.storage().begin(), m.storage().end(), [](std::uint8_t v) { return v != 0; });
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  require_shape(b.shape(), a.shape(), "max_abs_diff");
  float m = 0.0f;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace imloc
