#pragma once

// All-MLP decoder: per-level 1x1 projection to decoder_dim, bilinear
// resize to stride 4, channel concat, then a 1x1 fusion conv with
// norm + ReLU and a final 1x1 conv to one logit channel.

#include <array>
#include <optional>

#include "imloc/pyramid.hpp"

namespace imloc {

class PredictHead {
 public:
  PredictHead(const ModelConfig& cfg, ParameterStore& store, Rng& rng);

  /// Logits (1, H/4, W/4). `training` selects batch statistics for batch norm
  /// and updates its running estimates.
  ag::Var predict(const PyramidFeatures& pyramid, bool training);

  const HeadConfig& config() const noexcept { return cfg_.head; }

 private:
  ModelConfig cfg_;
  std::array<ag::Var, 5> unify_w_, unify_b_;
  ag::Var fuse_w_, fuse_b_, norm_w_, norm_b_;
  ag::BatchNormState bn_;
  ag::Var pred_w_, pred_b_;
};

/// Bilinear upsampling of a (C, h, w) map to (C, out_h, out_w).
ag::Var upsample_full(const ag::Var& logits, std::int64_t out_h, std::int64_t out_w);

}  // namespace imloc
