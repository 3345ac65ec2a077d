#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "imloc/tensor.hpp"

namespace imloc {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RGB image as (3, h, w) float in [0, 1].
Tensor read_image(const std::filesystem::path& path);
/// Grayscale or RGB mask; luminance > 127 marks manipulated pixels.
MaskTensor decode_mask(const std::filesystem::path& path);

/// (3, h, w) float in [0, 1] -> 8-bit RGB PNG.
void write_rgb_png(const std::filesystem::path& path, const Tensor& image);
/// (1, h, w) 8-bit values -> single-channel PNG.
void write_gray_png(const std::filesystem::path& path, const ByteTensor& gray);
/// Binary mask -> 0/255 PNG.
void write_mask_png(const std::filesystem::path& path, const MaskTensor& mask);
/// Probabilities -> round(p * 255) PNG.
void write_probability_png(const std::filesystem::path& path, const Tensor& prob);

ByteTensor to_bytes(const Tensor& unit_range);
Tensor from_bytes(const ByteTensor& bytes);

/// JPEG encode/decode round trip of a (3, h, w) image at quality 1..100.
Tensor jpeg_round_trip(const Tensor& image, int quality);

}  // namespace imloc
