#pragma once

// Simple feature pyramid: five independent branches turn the single
// stride-16 backbone map into maps at strides {4, 8, 16, 32, 64}, each with
// `pyramid_channels` channels.
//   x4    ConvT -> LN -> GELU -> ConvT -> LN -> Conv1x1 -> LN -> Conv3x3 -> LN
//   x2    ConvT -> LN -> Conv1x1 -> LN -> Conv3x3 -> LN
//   x1    Conv1x1 -> LN -> Conv3x3 -> LN
//   x0.5  MaxPool -> Conv1x1 -> LN -> Conv3x3 -> LN
//   x0.25 MaxPool -> Conv1x1 -> LN -> Conv3x3 -> LN -> MaxPool
// LN is a per-location layer norm over channels.

#include <array>
#include <string>
#include <vector>

#include "imloc/backbone.hpp"

namespace imloc {

inline constexpr std::array<std::int64_t, 5> kPyramidStrides{4, 8, 16, 32, 64};
/// Checkpoint name fragment per level: sfpn.scale{4,2,1,05,025}.*
inline constexpr std::array<const char*, 5> kPyramidScaleNames{"4", "2", "1", "05", "025"};

struct PyramidFeatures {
  std::vector<FeatureMap> maps;  // ordered by kPyramidStrides
};

class SimpleFeaturePyramid {
 public:
  SimpleFeaturePyramid(const ModelConfig& cfg, ParameterStore& store, Rng& rng);

  PyramidFeatures build(const FeatureMap& ge) const;

 private:
  struct ConvNorm {
    ag::Var w, b, norm_w, norm_b;
  };
  struct Branch {
    std::vector<ConvNorm> upsample;  // transposed convs
    ConvNorm lateral, output;
  };

  ModelConfig cfg_;
  std::array<Branch, 5> branches_;

  ag::Var run_branch(std::size_t level, const ag::Var& x) const;
};

}  // namespace imloc
