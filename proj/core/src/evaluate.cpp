#include "imloc/evaluate.hpp"

#include <stdexcept>

namespace imloc {

ImageMetrics score_prediction(const Tensor& prob, const Sample& sample) {
  ImageMetrics m;
  m.source_id = sample.source_id;
  m.f1 = f1_at_threshold(prob, sample.mask);
  m.auc = auc(prob, sample.mask);
  return m;
}

MetricsReport evaluate_dataset(Model& model, const SampleSet& samples, const SampleTransform& transform) {
  if (samples.empty()) throw std::invalid_argument("evaluate_dataset: split '" + samples.name() + "' is empty");
  MetricsReport report;
  report.dataset = samples.name();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Sample s = samples.get(i);
    if (transform) s = transform(s);
    const auto padded = pad_to_canvas(s, model.canvas(), model.config().patch_size);
    report.per_image.push_back(score_prediction(model.predict(padded), s));
  }
  return report;
}

}  // namespace imloc
