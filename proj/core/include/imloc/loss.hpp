#pragma once

// Segmentation BCE plus band-restricted edge BCE:
//   total = seg + lambda * edge
// seg averages over every canvas pixel, edge only over the edge band (an
// empty band contributes 0). Probabilities are clamped to [eps, 1 - eps],
// which in logit space is a clamp to +-log((1 - eps) / eps).

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "imloc/autograd.hpp"
#include "imloc/morphology.hpp"
#include "imloc/tensor.hpp"

namespace imloc {

struct LossConfig {
  double lambda = 20.0;
  double epsilon = 1e-6;

  void validate() const {
    if (!(lambda >= 0)) throw std::invalid_argument("loss.lambda must be non-negative");
    if (!(epsilon > 0 && epsilon < 0.5)) throw std::invalid_argument("loss.epsilon must lie in (0, 0.5)");
  }
};

struct LossTerms {
  double total = 0;
  double seg = 0;
  double edge = 0;
};

/// Mean BCE in probability space over pixels where `weight` is set (all
/// pixels when absent); 0 when no pixel is selected.
double bce(std::span<const float> prob, std::span<const std::uint8_t> target,
           std::optional<std::span<const std::uint8_t>> weight = std::nullopt, double epsilon = 1e-6);
double bce(const Tensor& prob, const MaskTensor& target, const MaskTensor* weight = nullptr,
           double epsilon = 1e-6);

namespace detail {

template <typename T>
T softplus(T z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace detail

/// Loss terms from logits. When `grad` is non-empty it receives
/// d(total)/d(logit) for every pixel.
template <typename T>
LossTerms combined_loss_from_logits(std::span<const T> logits, std::span<const std::uint8_t> target,
                                    std::span<const std::uint8_t> band, const LossConfig& cfg,
                                    std::span<T> grad = {}) {
  if (target.size() != logits.size() || band.size() != logits.size() ||
      (!grad.empty() && grad.size() != logits.size())) {
    throw ShapeError("combined_loss: logits, mask and edge band must have the same size");
  }
  const T bound = static_cast<T>(std::log((1.0 - cfg.epsilon) / cfg.epsilon));
  const std::size_t n = logits.size();
  std::size_t band_n = 0;
  for (auto b : band) band_n += b ? 1 : 0;
  // Sums run in double in a fixed row-major order.
  double seg = 0, edge = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T z = std::clamp(logits[i], -bound, bound);
    const T t = target[i] ? T(1) : T(0);
    const auto l = static_cast<double>(detail::softplus(z) - t * z);
    seg += l;
    if (band[i]) edge += l;
  }
  seg /= static_cast<double>(n);
  edge = band_n ? edge / static_cast<double>(band_n) : 0.0;
  const T lambda = static_cast<T>(cfg.lambda);
  if (!grad.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const T z = logits[i];
      if (z <= -bound || z >= bound) {
        grad[i] = 0;
        continue;
      }
      const T d = T(1) / (T(1) + std::exp(-z)) - (target[i] ? T(1) : T(0));
      T g = d / static_cast<T>(n);
      if (band[i]) g += lambda * d / static_cast<T>(band_n);
      grad[i] = g;
    }
  }
  return {seg + cfg.lambda * edge, seg, edge};
}

/// Differentiable total loss for a (1, H, W) canvas-resolution logit map.
ag::Var combined_loss(const ag::Var& logits_full, const MaskTensor& mask_p, const EdgeMask& edge_p,
                      const LossConfig& cfg, LossTerms* terms = nullptr);

}  // namespace imloc
