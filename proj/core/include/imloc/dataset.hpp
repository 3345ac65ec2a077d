#pragma once

#include <optional>
#include <string>
#include <vector>

#include "imloc/manifest.hpp"
#include "imloc/sample.hpp"

namespace imloc {

/// Ordered collection of samples, either held in memory or read from a
/// manifest on demand.
class SampleSet {
 public:
  SampleSet() = default;
  static SampleSet from_samples(std::vector<Sample> samples, std::string name = "memory");
  /// Entries of `split` (all entries when nullopt). With `cache` the decoded
  /// samples are kept after first use.
  static SampleSet from_manifest(const DatasetManifest& manifest, std::optional<Split> split, bool cache = true,
                                 std::string name = {});

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::string& name() const noexcept { return name_; }
  const std::string& source_id(std::size_t i) const { return ids_.at(i); }
  Sample get(std::size_t i) const;

 private:
  std::string name_;
  std::vector<std::string> ids_;
  std::vector<ManifestEntry> entries_;
  mutable std::vector<std::optional<Sample>> cache_;
  bool caching_ = true;
};

}  // namespace imloc
