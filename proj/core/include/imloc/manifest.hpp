#pragma once

// JSON-lines dataset manifest. One object per line:
//   {"image_path": ..., "mask_path": ... | null, "label": "authentic"|"manipulated",
//    "split": "train"|"test"}
// Relative paths resolve against the manifest's directory.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "imloc/sample.hpp"

namespace imloc {

enum class Label { authentic, manipulated };
enum class Split { train, test };

std::string to_string(Label l);
std::string to_string(Split s);
Label parse_label(const std::string& s);
Split parse_split(const std::string& s);

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::filesystem::path image_path;  // absolute after loading
  std::optional<std::filesystem::path> mask_path;
  Label label = Label::authentic;
  Split split = Split::train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct ManifestCounts {
  std::size_t authentic = 0, manipulated = 0, train = 0, test = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  ManifestCounts counts() const;
  DatasetManifest filter(Split split) const;
  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

/// Parses and validates; errors name the offending line.
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Writes paths relative to the manifest's directory when possible.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Decodes one entry; authentic entries without a mask get an all-zero mask.
Sample load_sample(const ManifestEntry& entry);
std::string source_id_of(const ManifestEntry& entry);

}  // namespace imloc
