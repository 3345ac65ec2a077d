#include "imloc/model.hpp"

#include <cmath>

namespace imloc {

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  Rng r_backbone = rng.derive("backbone"), r_pyramid = rng.derive("sfpn"), r_head = rng.derive("head");
  backbone_ = std::make_unique<VitBackbone>(cfg_, store_, r_backbone);
  pyramid_ = std::make_unique<SimpleFeaturePyramid>(cfg_, store_, r_pyramid);
  head_ = std::make_unique<PredictHead>(cfg_, store_, r_head);
}

Model::Forward Model::forward(const Tensor& canvas_image, bool training) {
  Forward f;
  f.backbone = backbone_->encode(canvas_image);
  f.pyramid = pyramid_->build(f.backbone);
  f.logits = head_->predict(f.pyramid, training);
  f.logits_full = upsample_full(f.logits, cfg_.canvas_h, cfg_.canvas_w);
  return f;
}

Tensor Model::predict_canvas(const Tensor& canvas_image) {
  ag::NoGradGuard guard;
  return sigmoid(forward(canvas_image, false).logits_full.value());
}

Tensor Model::predict(const PaddedSample& padded) { return crop_to_content(predict_canvas(padded.image), padded); }

void Model::copy_weights_from(const Model& other) {
  const auto& src = other.store_.entries();
  auto& dst = store_.entries();
  if (src.size() != dst.size()) throw std::invalid_argument("copy_weights_from: parameter layouts differ");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || src[i].var.shape() != dst[i].var.shape()) {
      throw std::invalid_argument("copy_weights_from: mismatch at " + dst[i].name);
    }
    dst[i].var.mutable_value() = src[i].var.value();
  }
}

Tensor sigmoid(const Tensor& logits) {
  Tensor p(logits.shape());
  for (std::int64_t i = 0; i < p.numel(); ++i) p[i] = 1.0f / (1.0f + std::exp(-logits[i]));
  return p;
}

}  // namespace imloc
