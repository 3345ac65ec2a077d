#include "imloc/backbone.hpp"

#include <stdexcept>

namespace imloc {

Tensor patchify(const Tensor& image, std::int64_t patch) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("patchify: expected (3,H,W) image, got " + shape_str(image.shape()));
  }
  const auto h = image.dim(1), w = image.dim(2);
  if (h % patch != 0 || w % patch != 0) {
    throw ShapeError("patchify: image " + shape_str(image.shape()) + " not divisible by patch size " +
                     std::to_string(patch));
  }
  const auto gh = h / patch, gw = w / patch, cols = 3 * patch * patch;
  Tensor out(Shape{gh * gw, cols});
  for (std::int64_t gy = 0; gy < gh; ++gy)
    for (std::int64_t gx = 0; gx < gw; ++gx) {
      float* row = out.data() + (gy * gw + gx) * cols;
      for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t dy = 0; dy < patch; ++dy)
          std::copy_n(image.data() + (c * h + gy * patch + dy) * w + gx * patch, patch,
                      row + (c * patch + dy) * patch);
    }
  return out;
}

VitBackbone::VitBackbone(const ModelConfig& cfg, ParameterStore& store, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const auto c = cfg_.embed_dim, p = cfg_.patch_size, hidden = cfg_.mlp_hidden();
  const auto tokens = cfg_.grid_h() * cfg_.grid_w();
  auto ones = [](std::int64_t n) { return Tensor::full(Shape{n}, 1.0f); };
  auto zeros = [](std::int64_t n) { return Tensor::zeros(Shape{n}); };
  patch_w_ = store.add_parameter("patch_embed.proj.weight", init::fan_in_uniform(Shape{c, 3, p, p}, 3 * p * p, rng));
  patch_b_ = store.add_parameter("patch_embed.proj.bias", zeros(c), false);
  pos_embed_ = store.add_parameter("pos_embed", init::trunc_normal(Shape{tokens, c}, 0.02, rng), false);
  for (std::int64_t i = 0; i < cfg_.depth; ++i) {
    const std::string pre = "blocks." + std::to_string(i) + ".";
    Block b;
    b.norm1_w = store.add_parameter(pre + "norm1.weight", ones(c), false);
    b.norm1_b = store.add_parameter(pre + "norm1.bias", zeros(c), false);
    b.qkv_w = store.add_parameter(pre + "attn.qkv.weight", init::trunc_normal(Shape{3 * c, c}, 0.02, rng));
    b.qkv_b = store.add_parameter(pre + "attn.qkv.bias", zeros(3 * c), false);
    b.proj_w = store.add_parameter(pre + "attn.proj.weight", init::trunc_normal(Shape{c, c}, 0.02, rng));
    b.proj_b = store.add_parameter(pre + "attn.proj.bias", zeros(c), false);
    b.norm2_w = store.add_parameter(pre + "norm2.weight", ones(c), false);
    b.norm2_b = store.add_parameter(pre + "norm2.bias", zeros(c), false);
    b.fc1_w = store.add_parameter(pre + "mlp.fc1.weight", init::trunc_normal(Shape{hidden, c}, 0.02, rng));
    b.fc1_b = store.add_parameter(pre + "mlp.fc1.bias", zeros(hidden), false);
    b.fc2_w = store.add_parameter(pre + "mlp.fc2.weight", init::trunc_normal(Shape{c, hidden}, 0.02, rng));
    b.fc2_b = store.add_parameter(pre + "mlp.fc2.bias", zeros(c), false);
    blocks_.push_back(std::move(b));
  }
  norm_w_ = store.add_parameter("norm.weight", ones(c), false);
  norm_b_ = store.add_parameter("norm.bias", zeros(c), false);
}

ag::Var VitBackbone::patch_embed(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != cfg_.canvas_h || image.dim(2) != cfg_.canvas_w) {
    throw ShapeError("patch_embed: expected (3," + std::to_string(cfg_.canvas_h) + "," +
                     std::to_string(cfg_.canvas_w) + ") canvas, got " + shape_str(image.shape()));
  }
  const auto p = cfg_.patch_size, c = cfg_.embed_dim;
  auto patches = ag::constant(patchify(image, p));
  auto w2d = ag::reshape(patch_w_, Shape{c, 3 * p * p});
  return ag::add(ag::linear(patches, w2d, patch_b_), pos_embed_);
}

AttentionMode VitBackbone::block_mode(std::size_t index) const {
  return cfg_.is_global_block(static_cast<std::int64_t>(index)) ? AttentionMode::global : AttentionMode::windowed;
}

ag::Var VitBackbone::attention_block(std::size_t index, const ag::Var& tokens, AttentionMode mode,
                                     Tensor* attention_probs) const {
  const Block& b = blocks_.at(index);
  const auto gh = cfg_.grid_h(), gw = cfg_.grid_w();
  if (tokens.value().rank() != 2 || tokens.dim(0) != gh * gw || tokens.dim(1) != cfg_.embed_dim) {
    throw ShapeError("attention_block: tokens " + shape_str(tokens.shape()) + " do not match the configured grid");
  }
  ag::Var h = ag::layer_norm(tokens, b.norm1_w, b.norm1_b);
  ag::Var attn;
  if (mode == AttentionMode::windowed) {
    const auto layout = ag::window_layout(gh, gw, cfg_.window_size);
    auto win = ag::window_partition(h, layout);
    auto qkv = ag::linear(win, b.qkv_w, b.qkv_b);
    const auto seq = layout.window * layout.window;
    auto o = ag::multihead_attention(qkv, layout.num_windows(), seq, cfg_.num_heads, attention_probs);
    attn = ag::window_unpartition(ag::linear(o, b.proj_w, b.proj_b), layout);
  } else {
    auto qkv = ag::linear(h, b.qkv_w, b.qkv_b);
    auto o = ag::multihead_attention(qkv, 1, gh * gw, cfg_.num_heads, attention_probs);
    attn = ag::linear(o, b.proj_w, b.proj_b);
  }
  ag::Var x = ag::add(tokens, attn);
  ag::Var m = ag::layer_norm(x, b.norm2_w, b.norm2_b);
  m = ag::linear(ag::gelu(ag::linear(m, b.fc1_w, b.fc1_b)), b.fc2_w, b.fc2_b);
  return ag::add(x, m);
}

FeatureMap VitBackbone::encode(const Tensor& image) const {
  ag::Var x = patch_embed(image);
  for (std::size_t i = 0; i < blocks_.size(); ++i) x = attention_block(i, x, block_mode(i));
  x = ag::layer_norm(x, norm_w_, norm_b_);
  return {ag::tokens_to_chw(x, cfg_.grid_h(), cfg_.grid_w()), cfg_.patch_size};
}

}  // namespace imloc
