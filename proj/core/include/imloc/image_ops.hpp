#pragma once

#include "imloc/tensor.hpp"

namespace imloc {

/// Bilinear resize of a (C, H, W) tensor, half-pixel centers
/// (align_corners = false), edge-clamped.
Tensor resize_bilinear(const Tensor& chw, std::int64_t out_h, std::int64_t out_w);
/// Adjoint of resize_bilinear: scatters an output-sized gradient back onto
/// the (C, in_h, in_w) input grid.
Tensor resize_bilinear_backward(const Tensor& grad_out, std::int64_t in_h, std::int64_t in_w);
/// Nearest-neighbour resize with half-pixel centers; keeps masks binary.
MaskTensor resize_nearest(const MaskTensor& chw, std::int64_t out_h, std::int64_t out_w);

/// Separable Gaussian blur truncated at floor(4 sigma), reflective border.
Tensor gaussian_blur(const Tensor& chw, double sigma);
/// Normalized 1-D Gaussian taps, length 2 * floor(4 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

Tensor flip_horizontal(const Tensor& chw);
MaskTensor flip_horizontal(const MaskTensor& chw);
Tensor flip_vertical(const Tensor& chw);
MaskTensor flip_vertical(const MaskTensor& chw);
/// Counter-clockwise rotation by quarter_turns * 90 degrees.
Tensor rotate90(const Tensor& chw, int quarter_turns);
MaskTensor rotate90(const MaskTensor& chw, int quarter_turns);
/// Rotation about the image center by `degrees` (counter-clockwise), same
/// output size, zero fill. Bilinear for images, nearest for masks.
Tensor rotate_small(const Tensor& chw, double degrees);
MaskTensor rotate_small(const MaskTensor& chw, double degrees);

}  // namespace imloc
