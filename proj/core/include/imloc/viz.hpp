#pragma once

#include <array>
#include <optional>
#include <vector>

#include "imloc/backbone.hpp"
#include "imloc/tensor.hpp"

namespace imloc {

/// Channel mean of a (C, H, W) map, min-max scaled to [0, 255]; a constant
/// map renders as uniform 128. Returns (1, H, W).
ByteTensor visualize_feature_map(const Tensor& chw);
ByteTensor visualize_feature_map(const FeatureMap& fm);

/// Blends red into `image` (3, H, W) where prob >= threshold.
Tensor overlay_prediction(const Tensor& image, const Tensor& prob, double threshold = 0.5, double alpha = 0.5);

struct PlotSeries {
  std::vector<double> x, y;
  std::array<float, 3> color{0.1f, 0.3f, 0.8f};
  bool dashed = false;
  bool markers = true;
};

struct PlotOptions {
  int width = 640;
  int height = 480;
  std::optional<std::array<double, 2>> y_range;  // data range when unset
};

/// Line chart with axes and numeric tick labels, as an RGB (3, H, W) image.
Tensor render_plot(const std::vector<PlotSeries>& series, const PlotOptions& opts = {});

}  // namespace imloc
