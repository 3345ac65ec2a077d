#pragma once

#include <functional>

#include "imloc/dataset.hpp"
#include "imloc/metrics.hpp"
#include "imloc/model.hpp"

namespace imloc {

/// Optional per-sample transform applied before padding (used by attacks).
using SampleTransform = std::function<Sample(const Sample&)>;

/// Pads each sample onto the model canvas, predicts, crops back to the
/// original extent and scores F1 at 0.5 and AUC against the original mask.
/// Throws std::invalid_argument for an empty set.
MetricsReport evaluate_dataset(Model& model, const SampleSet& samples, const SampleTransform& transform = {});

/// Scores an already computed probability map for one sample.
ImageMetrics score_prediction(const Tensor& prob, const Sample& sample);

}  // namespace imloc
