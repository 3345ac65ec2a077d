#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace imloc {

enum class NormKind { none, layer, batch };

std::string to_string(NormKind k);
NormKind parse_norm_kind(const std::string& s);

struct HeadConfig {
  std::int64_t decoder_dim = 256;
  NormKind norm_kind = NormKind::batch;
  std::int64_t output_stride = 4;
};

/// Architectural constants for backbone, pyramid and head.
struct ModelConfig {
  std::int64_t patch_size = 16;
  std::int64_t embed_dim = 768;
  std::int64_t depth = 12;
  std::int64_t num_heads = 12;
  std::int64_t window_size = 14;
  std::vector<std::int64_t> global_block_indexes{2, 5, 8, 11};
  std::int64_t canvas_h = 1024;
  std::int64_t canvas_w = 1024;
  double mlp_ratio = 4.0;
  std::int64_t pyramid_channels = 256;
  HeadConfig head{};

  /// ViT-Base at a 1024 x 1024 canvas.
  static ModelConfig vit_base();
  /// embed 64, depth 4, heads 4, window 4, canvas 128.
  static ModelConfig toy();
  static ModelConfig preset(const std::string& name);

  std::int64_t grid_h() const { return canvas_h / patch_size; }
  std::int64_t grid_w() const { return canvas_w / patch_size; }
  std::int64_t mlp_hidden() const { return static_cast<std::int64_t>(static_cast<double>(embed_dim) * mlp_ratio); }
  bool is_global_block(std::int64_t i) const;

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

void to_json(nlohmann::json& j, const HeadConfig& c);
void from_json(const nlohmann::json& j, HeadConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace imloc
