#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imloc/tensor.hpp"

namespace imloc {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

ConfusionCounts confusion_at_threshold(const Tensor& prob, const MaskTensor& gt, double threshold = 0.5);

/// Pixel F1 of prob >= threshold against gt. Images without positives score
/// 1 for an empty prediction and 0 otherwise.
double f1_at_threshold(const Tensor& prob, const MaskTensor& gt, double threshold = 0.5);
double f1_from_counts(const ConfusionCounts& c);

/// Rank-based pixel AUC (ties count one half). Undefined for single-class gt.
std::optional<double> auc(const Tensor& prob, const MaskTensor& gt);

/// F1 of predicting every pixel manipulated: 2 rho / (1 + rho).
double all_positive_f1(const MaskTensor& gt);

struct ImageMetrics {
  std::string source_id;
  double f1 = 0;
  std::optional<double> auc;
};

struct MetricsReport {
  std::string dataset;
  std::vector<ImageMetrics> per_image;

  std::size_t n_images() const { return per_image.size(); }
  std::size_t n_auc_defined() const;
  /// Mean per-image F1 (0 for an empty report).
  double dataset_f1() const;
  /// Mean over images whose AUC is defined.
  std::optional<double> dataset_auc() const;

  /// Concatenates per-image records; aggregation is order-independent.
  void merge(const MetricsReport& other);
  /// {dataset, n_images, f1, auc, per_image: [...]}
  std::string to_json(int indent = 2) const;
};

}  // namespace imloc
