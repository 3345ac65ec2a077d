#include "imloc/dataset.hpp"

namespace imloc {

SampleSet SampleSet::from_samples(std::vector<Sample> samples, std::string name) {
  SampleSet s;
  s.name_ = std::move(name);
  for (auto& sample : samples) {
    sample.validate();
    s.ids_.push_back(sample.source_id);
    s.cache_.emplace_back(std::move(sample));
  }
  return s;
}

SampleSet SampleSet::from_manifest(const DatasetManifest& manifest, std::optional<Split> split, bool cache,
                                   std::string name) {
  SampleSet s;
  s.name_ = name.empty() ? (split ? to_string(*split) : std::string("all")) : std::move(name);
  s.caching_ = cache;
  for (const auto& e : manifest.entries) {
    if (split && e.split != *split) continue;
    s.ids_.push_back(source_id_of(e));
    s.entries_.push_back(e);
  }
  s.cache_.resize(s.ids_.size());
  return s;
}

Sample SampleSet::get(std::size_t i) const {
  auto& slot = cache_.at(i);
  if (slot) return *slot;
  Sample s = load_sample(entries_.at(i));
  if (caching_) slot = s;
  return s;
}

}  // namespace imloc
