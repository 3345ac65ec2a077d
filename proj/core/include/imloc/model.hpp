#pragma once

#include <memory>

#include "imloc/head.hpp"
#include "imloc/padding.hpp"

namespace imloc {

/// Backbone + pyramid + head sharing one parameter store.
class Model {
 public:
  explicit Model(const ModelConfig& cfg, std::uint64_t init_seed = 0);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  struct Forward {
    FeatureMap backbone;
    PyramidFeatures pyramid;
    ag::Var logits;       // (1, H/4, W/4)
    ag::Var logits_full;  // (1, H, W)
  };

  Forward forward(const Tensor& canvas_image, bool training);
  /// Canvas-resolution probabilities (1, H, W), inference mode, no graph.
  Tensor predict_canvas(const Tensor& canvas_image);
  /// Probabilities cropped back to the sample's original size.
  Tensor predict(const PaddedSample& padded);

  const ModelConfig& config() const noexcept { return cfg_; }
  Canvas canvas() const noexcept { return {cfg_.canvas_h, cfg_.canvas_w}; }
  ParameterStore& parameters() noexcept { return store_; }
  const ParameterStore& parameters() const noexcept { return store_; }
  VitBackbone& backbone() noexcept { return *backbone_; }
  SimpleFeaturePyramid& pyramid() noexcept { return *pyramid_; }
  PredictHead& head() noexcept { return *head_; }

  /// Copies all tensor values from another model of the same configuration.
  void copy_weights_from(const Model& other);

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  std::unique_ptr<VitBackbone> backbone_;
  std::unique_ptr<SimpleFeaturePyramid> pyramid_;
  std::unique_ptr<PredictHead> head_;
};

Tensor sigmoid(const Tensor& logits);

}  // namespace imloc
