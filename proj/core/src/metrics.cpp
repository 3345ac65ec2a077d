#include "imloc/metrics.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <numeric>

namespace imloc {

ConfusionCounts confusion_at_threshold(const Tensor& prob, const MaskTensor& gt, double threshold) {
  require_shape(gt.shape(), prob.shape(), "confusion_at_threshold");
  ConfusionCounts c;
  for (std::int64_t i = 0; i < prob.numel(); ++i) {
    const bool p = static_cast<double>(prob[i]) >= threshold;
    const bool t = gt[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_from_counts(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return c.fp == 0 ? 1.0 : 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

double f1_at_threshold(const Tensor& prob, const MaskTensor& gt, double threshold) {
  return f1_from_counts(confusion_at_threshold(prob, gt, threshold));
}

std::optional<double> auc(const Tensor& prob, const MaskTensor& gt) {
  require_shape(gt.shape(), prob.shape(), "auc");
  const auto n = static_cast<std::size_t>(prob.numel());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return prob[static_cast<std::int64_t>(a)] < prob[static_cast<std::int64_t>(b)];
  });
  // Mann-Whitney U with mid-ranks for ties.
  double pos_rank_sum = 0;
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    const float v = prob[static_cast<std::int64_t>(order[i])];
    while (j < n && prob[static_cast<std::int64_t>(order[j])] == v) ++j;
    const double mid_rank = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
    for (std::size_t t = i; t < j; ++t) {
      if (gt[static_cast<std::int64_t>(order[t])]) {
        pos_rank_sum += mid_rank;
        ++pos;
      }
    }
    i = j;
  }
  const auto neg = static_cast<std::int64_t>(n) - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1) / 2.0) / (p * q);
}

double all_positive_f1(const MaskTensor& gt) {
  if (gt.numel() == 0) return 0.0;
  const double rho = static_cast<double>(count_true(gt)) / static_cast<double>(gt.numel());
  return 2.0 * rho / (1.0 + rho);
}

std::size_t MetricsReport::n_auc_defined() const {
  return static_cast<std::size_t>(
      std::count_if(per_image.begin(), per_image.end(), [](const ImageMetrics& m) { return m.auc.has_value(); }));
}

double MetricsReport::dataset_f1() const {
  if (per_image.empty()) return 0.0;
  double s = 0;
  for (const auto& m : per_image) s += m.f1;
  return s / static_cast<double>(per_image.size());
}

std::optional<double> MetricsReport::dataset_auc() const {
  double s = 0;
  std::size_t n = 0;
  for (const auto& m : per_image) {
    if (m.auc) {
      s += *m.auc;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

void MetricsReport::merge(const MetricsReport& other) {
  per_image.insert(per_image.end(), other.per_image.begin(), other.per_image.end());
}

std::string MetricsReport::to_json(int indent) const {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["n_images"] = n_images();
  j["f1"] = dataset_f1();
  const auto a = dataset_auc();
  j["auc"] = a ? nlohmann::json(*a) : nlohmann::json(nullptr);
  j["n_auc_defined"] = n_auc_defined();
  auto& arr = j["per_image"] = nlohmann::json::array();
  for (const auto& m : per_image) {
    arr.push_back({{"source_id", m.source_id},
                   {"f1", m.f1},
                   {"auc", m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr)}});
  }
  return j.dump(indent);
}

}  // namespace imloc
