#include "imloc/head.hpp"

namespace imloc {

PredictHead::PredictHead(const ModelConfig& cfg, ParameterStore& store, Rng& rng) : cfg_(cfg) {
  const auto cs = cfg_.pyramid_channels, cd = cfg_.head.decoder_dim;
  for (std::size_t j = 0; j < unify_w_.size(); ++j) {
    const std::string pre = "head.linear_c" + std::to_string(j);
    unify_w_[j] = store.add_parameter(pre + ".weight", init::fan_in_uniform(Shape{cd, cs, 1, 1}, cs, rng));
    unify_b_[j] = store.add_parameter(pre + ".bias", Tensor::zeros(Shape{cd}), false);
  }
  const auto fused_in = cd * static_cast<std::int64_t>(unify_w_.size());
  fuse_w_ = store.add_parameter("head.fuse.weight", init::fan_in_uniform(Shape{cd, fused_in, 1, 1}, fused_in, rng));
  fuse_b_ = store.add_parameter("head.fuse.bias", Tensor::zeros(Shape{cd}), false);
  if (cfg_.head.norm_kind != NormKind::none) {
    norm_w_ = store.add_parameter("head.fuse_norm.weight", Tensor::full(Shape{cd}, 1.0f), false);
    norm_b_ = store.add_parameter("head.fuse_norm.bias", Tensor::zeros(Shape{cd}), false);
  }
  if (cfg_.head.norm_kind == NormKind::batch) {
    bn_.running_mean = store.add_buffer("head.fuse_norm.running_mean", Tensor::zeros(Shape{cd}));
    bn_.running_var = store.add_buffer("head.fuse_norm.running_var", Tensor::full(Shape{cd}, 1.0f));
  }
  pred_w_ = store.add_parameter("head.pred.weight", init::fan_in_uniform(Shape{1, cd, 1, 1}, cd, rng));
  pred_b_ = store.add_parameter("head.pred.bias", Tensor::zeros(Shape{1}), false);
}

ag::Var PredictHead::predict(const PyramidFeatures& pyramid, bool training) {
  if (pyramid.maps.size() != unify_w_.size()) {
    throw ShapeError("predict head: expected " + std::to_string(unify_w_.size()) + " pyramid levels, got " +
                     std::to_string(pyramid.maps.size()));
  }
  const auto oh = cfg_.canvas_h / cfg_.head.output_stride, ow = cfg_.canvas_w / cfg_.head.output_stride;
  std::vector<ag::Var> parts;
  for (std::size_t j = 0; j < pyramid.maps.size(); ++j) {
    const auto& fm = pyramid.maps[j];
    if (fm.channels() != cfg_.pyramid_channels) {
      throw ShapeError("predict head: level " + std::to_string(j) + " has " + std::to_string(fm.channels()) +
                       " channels, expected " + std::to_string(cfg_.pyramid_channels));
    }
    auto u = ag::conv2d(fm.data, unify_w_[j], unify_b_[j], 0);
    parts.push_back(ag::resize_bilinear(u, oh, ow));
  }
  ag::Var h = ag::conv2d(ag::concat_channels(parts), fuse_w_, fuse_b_, 0);
  switch (cfg_.head.norm_kind) {
    case NormKind::none: break;
    case NormKind::layer: h = ag::channel_layer_norm(h, norm_w_, norm_b_); break;
    case NormKind::batch: h = ag::batch_norm(h, norm_w_, norm_b_, bn_, training); break;
  }
  h = ag::relu(h);
  return ag::conv2d(h, pred_w_, pred_b_, 0);
}

ag::Var upsample_full(const ag::Var& logits, std::int64_t out_h, std::int64_t out_w) {
  return ag::resize_bilinear(logits, out_h, out_w);
}

}  // namespace imloc
