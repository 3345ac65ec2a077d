#pragma once

// Windowed ViT encoder: non-overlapping patch embedding with a learned
// absolute positional embedding, pre-norm transformer blocks that attend
// either globally or within window tiles, a final layer norm, and a
// reshape to a (embed_dim, H/patch, W/patch) feature map.

#include <cstdint>
#include <vector>

#include "imloc/config.hpp"
#include "imloc/ops.hpp"
#include "imloc/parameters.hpp"

namespace imloc {

enum class AttentionMode { windowed, global };

/// Channel-major (C, H', W') map and its stride in canvas pixels.
struct FeatureMap {
  ag::Var data;
  std::int64_t stride = 1;

  const Tensor& value() const { return data.value(); }
  std::int64_t channels() const { return data.dim(0); }
  std::int64_t height() const { return data.dim(1); }
  std::int64_t width() const { return data.dim(2); }
};

/// (3, H, W) -> (H/p * W/p, 3 * p * p); rows in raster order, columns in
/// (channel, dy, dx) order to match a (C, 3, p, p) projection weight.
Tensor patchify(const Tensor& image, std::int64_t patch);

class VitBackbone {
 public:
  VitBackbone(const ModelConfig& cfg, ParameterStore& store, Rng& rng);

  const ModelConfig& config() const noexcept { return cfg_; }

  /// Patch tokens (grid_h * grid_w, embed_dim) with positions added.
  ag::Var patch_embed(const Tensor& image) const;
  /// One pre-norm block: x + Attn(LN(x)), then x + MLP(LN(x)).
  ag::Var attention_block(std::size_t index, const ag::Var& tokens, AttentionMode mode,
                          Tensor* attention_probs = nullptr) const;
  AttentionMode block_mode(std::size_t index) const;
  FeatureMap encode(const Tensor& image) const;

 private:
  struct Block {
    ag::Var norm1_w, norm1_b, qkv_w, qkv_b, proj_w, proj_b;
    ag::Var norm2_w, norm2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  ModelConfig cfg_;
  ag::Var patch_w_, patch_b_, pos_embed_;
  std::vector<Block> blocks_;
  ag::Var norm_w_, norm_b_;
};

}  // namespace imloc
