#pragma once

// Checkpoint directory layout:
//   metadata.json       {"format": "imloc-checkpoint", "version": 1,
//                        "model_config": {...}, "tensors": [{name, shape, file, kind}], ...extras}
//   tensors/<name>.f32  raw little-endian float32, row-major

#include <filesystem>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "imloc/model.hpp"

namespace imloc {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointData {
  nlohmann::json metadata;
  std::map<std::string, Tensor> tensors;
};

/// Writes `tensors` plus metadata (merged with `extra`) into `dir`.
void write_checkpoint(const std::filesystem::path& dir, const std::map<std::string, Tensor>& tensors,
                      const nlohmann::json& extra);
CheckpointData read_checkpoint(const std::filesystem::path& dir);

/// All parameters and buffers of `model`, metadata carries the model config.
void save_model(const std::filesystem::path& dir, const Model& model, const nlohmann::json& extra = {});
std::map<std::string, Tensor> model_tensors(const Model& model);

struct LoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> missing;     // expected by the model, absent in the file
  std::vector<std::string> unexpected;  // present in the file, ignored
  std::vector<std::string> shape_mismatch;
  std::vector<std::string> resampled;

  bool complete() const { return missing.empty() && shape_mismatch.empty(); }
  std::string summary() const;
};

/// Copies every tensor whose name and shape match; reports the rest.
LoadReport load_tensors(ParameterStore& store, const std::map<std::string, Tensor>& tensors);

/// Rebuilds a model from a checkpoint written by save_model. Throws
/// CheckpointError if any tensor is missing or mis-shaped.
std::unique_ptr<Model> load_model(const std::filesystem::path& dir);

/// Loads ViT encoder weights (names as in patch_embed.*, pos_embed,
/// blocks.{i}.*, norm.*). The positional embedding is resampled bicubically
/// to the configured grid; a leading class-token row is dropped. Pyramid and
/// head parameters are left untouched and not reported missing.
LoadReport load_pretrained(ParameterStore& store, const ModelConfig& cfg, const std::map<std::string, Tensor>& weights);

/// Bicubic resampling of an (src_h * src_w, C) grid to (dst_h * dst_w, C)
/// with corner alignment; reproduces linear ramps exactly.
Tensor resample_grid_bicubic(const Tensor& grid, std::int64_t src_h, std::int64_t src_w, std::int64_t dst_h,
                             std::int64_t dst_w);

}  // namespace imloc
