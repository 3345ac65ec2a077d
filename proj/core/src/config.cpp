#include "imloc/config.hpp"

#include <algorithm>
#include <stdexcept>

namespace imloc {

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::none: return "none";
    case NormKind::layer: return "layer";
    case NormKind::batch: return "batch";
  }
  return "none";
}

NormKind parse_norm_kind(const std::string& s) {
  if (s == "none") return NormKind::none;
  if (s == "layer") return NormKind::layer;
  if (s == "batch") return NormKind::batch;
  throw std::invalid_argument("unknown norm kind '" + s + "'");
}

ModelConfig ModelConfig::vit_base() { return ModelConfig{}; }

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.embed_dim = 64;
  c.depth = 4;
  c.num_heads = 4;
  c.window_size = 4;
  c.global_block_indexes = {1, 3};
  c.canvas_h = c.canvas_w = 128;
  c.pyramid_channels = 32;
  c.head.decoder_dim = 32;
  return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  if (name == "vit-base" || name == "vit_base") return vit_base();
  if (name == "toy") return toy();
  throw std::invalid_argument("unknown model preset '" + name + "'");
}

bool ModelConfig::is_global_block(std::int64_t i) const {
  return std::find(global_block_indexes.begin(), global_block_indexes.end(), i) != global_block_indexes.end();
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  if (patch_size <= 0 || embed_dim <= 0 || depth <= 0 || num_heads <= 0 || window_size <= 0) {
    fail("sizes must be positive");
  }
  if (embed_dim % num_heads != 0) fail("embed_dim must be divisible by num_heads");
  if (canvas_h <= 0 || canvas_w <= 0 || canvas_h % patch_size != 0 || canvas_w % patch_size != 0) {
    fail("canvas must be divisible by patch_size");
  }
  // The coarsest pyramid level sits at stride 64.
  if (canvas_h % 64 != 0 || canvas_w % 64 != 0) fail("canvas must be divisible by 64");
  if (embed_dim % 4 != 0) fail("embed_dim must be divisible by 4 for the stride-4 pyramid branch");
  for (auto i : global_block_indexes)
    if (i < 0 || i >= depth) fail("global block index " + std::to_string(i) + " outside [0, depth)");
  if (mlp_ratio <= 0) fail("mlp_ratio must be positive");
  if (pyramid_channels <= 0 || head.decoder_dim <= 0) fail("pyramid/decoder channels must be positive");
  if (head.output_stride != 4) fail("head output stride must be 4");
}

void to_json(nlohmann::json& j, const HeadConfig& c) {
  j = {{"decoder_dim", c.decoder_dim}, {"norm_kind", to_string(c.norm_kind)}, {"output_stride", c.output_stride}};
}

void from_json(const nlohmann::json& j, HeadConfig& c) {
  c.decoder_dim = j.value("decoder_dim", c.decoder_dim);
  if (j.contains("norm_kind")) c.norm_kind = parse_norm_kind(j.at("norm_kind").get<std::string>());
  c.output_stride = j.value("output_stride", c.output_stride);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"patch_size", c.patch_size},
       {"embed_dim", c.embed_dim},
       {"depth", c.depth},
       {"num_heads", c.num_heads},
       {"window_size", c.window_size},
       {"global_block_indexes", c.global_block_indexes},
       {"canvas", {c.canvas_h, c.canvas_w}},
       {"mlp_ratio", c.mlp_ratio},
       {"pyramid_channels", c.pyramid_channels},
       {"head", c.head}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (j.contains("preset")) c = ModelConfig::preset(j.at("preset").get<std::string>());
  c.patch_size = j.value("patch_size", c.patch_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.depth = j.value("depth", c.depth);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.window_size = j.value("window_size", c.window_size);
  c.global_block_indexes = j.value("global_block_indexes", c.global_block_indexes);
  if (j.contains("canvas")) {
    const auto& cv = j.at("canvas");
    if (cv.is_array()) {
      c.canvas_h = cv.at(0).get<std::int64_t>();
      c.canvas_w = cv.at(1).get<std::int64_t>();
    } else {
      c.canvas_h = c.canvas_w = cv.get<std::int64_t>();
    }
  }
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.pyramid_channels = j.value("pyramid_channels", c.pyramid_channels);
  if (j.contains("head")) j.at("head").get_to(c.head);
}

}  // namespace imloc
