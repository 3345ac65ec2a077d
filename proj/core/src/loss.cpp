#include "imloc/loss.hpp"

#include <algorithm>
#include <vector>

namespace imloc {

double bce(std::span<const float> prob, std::span<const std::uint8_t> target,
           std::optional<std::span<const std::uint8_t>> weight, double epsilon) {
  if (prob.size() != target.size() || (weight && weight->size() != prob.size())) {
    throw ShapeError("bce: shape mismatch");
  }
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (weight && !(*weight)[i]) continue;
    const double p = std::clamp(static_cast<double>(prob[i]), epsilon, 1.0 - epsilon);
    sum += target[i] ? -std::log(p) : -std::log(1.0 - p);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double bce(const Tensor& prob, const MaskTensor& target, const MaskTensor* weight, double epsilon) {
  require_shape(target.shape(), prob.shape(), "bce target");
  if (weight) {
    require_shape(weight->shape(), prob.shape(), "bce weight");
    return bce(prob.span(), target.span(), weight->span(), epsilon);
  }
  return bce(prob.span(), target.span(), std::nullopt, epsilon);
}

ag::Var combined_loss(const ag::Var& logits_full, const MaskTensor& mask_p, const EdgeMask& edge_p,
                      const LossConfig& cfg, LossTerms* terms) {
  cfg.validate();
  require_shape(mask_p.shape(), logits_full.shape(), "combined_loss mask");
  require_shape(edge_p.data.shape(), logits_full.shape(), "combined_loss edge mask");
  const bool need_grad = ag::grad_enabled() && logits_full.requires_grad();
  // Evaluated in double; the float gradient is rounded once at the end.
  const auto& lv = logits_full.value().storage();
  const std::vector<double> z(lv.begin(), lv.end());
  std::vector<double> gd(need_grad ? z.size() : 0);
  const LossTerms t =
      combined_loss_from_logits<double>(z, mask_p.span(), edge_p.data.span(), cfg, std::span<double>(gd));
  Tensor grad = need_grad ? Tensor(logits_full.shape()) : Tensor();
  for (std::size_t i = 0; i < gd.size(); ++i) grad[static_cast<std::int64_t>(i)] = static_cast<float>(gd[i]);
  if (terms) *terms = t;
  auto ln = logits_full.node();
  return ag::make_result(Tensor(Shape{1}, {static_cast<float>(t.total)}), {logits_full},
                         [ln, grad = std::move(grad)](const Tensor& g) {
                           Tensor gl = grad;
                           const float s = g[0];
                           for (std::int64_t i = 0; i < gl.numel(); ++i) gl[i] *= s;
                           ln->accumulate(gl);
                         });
}

}  // namespace imloc
