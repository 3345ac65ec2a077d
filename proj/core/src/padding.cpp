#include "imloc/padding.hpp"

#include <cmath>
#include <stdexcept>

#include "imloc/image_ops.hpp"

namespace imloc {

void Sample::validate() const {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("sample '" + source_id + "': image must be (3,h,w), got " + shape_str(image.shape()));
  }
  require_shape(mask.shape(), Shape{1, image.dim(1), image.dim(2)}, "sample mask");
  if (!is_binary(mask)) throw ShapeError("sample '" + source_id + "': mask is not binary");
}

std::pair<std::int64_t, std::int64_t> fitted_extent(std::int64_t h, std::int64_t w, const Canvas& canvas) {
  if (h <= canvas.height && w <= canvas.width) return {h, w};
  const double s = std::min(static_cast<double>(canvas.height) / static_cast<double>(h),
                            static_cast<double>(canvas.width) / static_cast<double>(w));
  auto nh = std::clamp<std::int64_t>(std::llround(static_cast<double>(h) * s), 1, canvas.height);
  auto nw = std::clamp<std::int64_t>(std::llround(static_cast<double>(w) * s), 1, canvas.width);
  return {nh, nw};
}

PaddedSample pad_to_canvas(const Sample& sample, const Canvas& canvas, std::int64_t patch_size) {
  if (canvas.height <= 0 || canvas.width <= 0 || patch_size <= 0 || canvas.height % patch_size != 0 ||
      canvas.width % patch_size != 0) {
    throw std::invalid_argument("canvas " + std::to_string(canvas.height) + "x" + std::to_string(canvas.width) +
                                " must be a positive multiple of patch size " + std::to_string(patch_size));
  }
  if (sample.image.rank() != 3 || sample.image.dim(1) <= 0 || sample.image.dim(2) <= 0) {
    throw std::invalid_argument("pad_to_canvas: image must have positive dimensions, got " +
                                shape_str(sample.image.shape()));
  }
  sample.validate();
  const auto h = sample.height(), w = sample.width();
  const auto [ch, cw] = fitted_extent(h, w, canvas);
  PaddedSample out;
  out.orig_h = h;
  out.orig_w = w;
  out.content_h = ch;
  out.content_w = cw;
  out.source_id = sample.source_id;
  out.image = Tensor(Shape{3, canvas.height, canvas.width});
  out.mask = MaskTensor(Shape{1, canvas.height, canvas.width});
  const bool shrink = ch != h || cw != w;
  const Tensor img = shrink ? resize_bilinear(sample.image, ch, cw) : sample.image;
  const MaskTensor msk = shrink ? resize_nearest(sample.mask, ch, cw) : sample.mask;
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < ch; ++y)
      std::copy_n(img.data() + (c * ch + y) * cw, cw, out.image.data() + (c * canvas.height + y) * canvas.width);
  for (std::int64_t y = 0; y < ch; ++y)
    std::copy_n(msk.data() + y * cw, cw, out.mask.data() + y * canvas.width);
  return out;
}

Tensor crop_to_content(const Tensor& prediction, const PaddedSample& padded) {
  if (prediction.rank() != 3 || prediction.dim(1) != padded.image.dim(1) ||
      prediction.dim(2) != padded.image.dim(2)) {
    throw ShapeError("crop_to_content: prediction " + shape_str(prediction.shape()) +
                     " does not match canvas " + shape_str(padded.image.shape()));
  }
  const auto c = prediction.dim(0), H = prediction.dim(1), W = prediction.dim(2);
  Tensor out(Shape{c, padded.content_h, padded.content_w});
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < padded.content_h; ++y)
      std::copy_n(prediction.data() + (k * H + y) * W, padded.content_w,
                  out.data() + (k * padded.content_h + y) * padded.content_w);
  if (padded.resized()) return resize_bilinear(out, padded.orig_h, padded.orig_w);
  return out;
}

}  // namespace imloc
