#include "imloc/manifest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "imloc/image_io.hpp"

namespace imloc {

namespace fs = std::filesystem;

std::string to_string(Label l) { return l == Label::authentic ? "authentic" : "manipulated"; }
std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Label parse_label(const std::string& s) {
  if (s == "authentic") return Label::authentic;
  if (s == "manipulated") return Label::manipulated;
  throw ManifestError("unknown label '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ManifestError("unknown split '" + s + "'");
}

ManifestCounts DatasetManifest::counts() const {
  ManifestCounts c;
  for (const auto& e : entries) {
    (e.label == Label::authentic ? c.authentic : c.manipulated)++;
    (e.split == Split::train ? c.train : c.test)++;
  }
  return c;
}

DatasetManifest DatasetManifest::filter(Split split) const {
  DatasetManifest out;
  for (const auto& e : entries)
    if (e.split == split) out.entries.push_back(e);
  return out;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw ManifestError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("image_path") || !j["image_path"].is_string()) {
      fail("entry needs a string image_path");
    }
    ManifestEntry e;
    try {
      e.label = parse_label(j.value("label", std::string{}));
      e.split = parse_split(j.value("split", std::string{}));
    } catch (const ManifestError& err) {
      fail(err.what());
    }
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    e.image_path = resolve(j["image_path"].get<std::string>());
    if (j.contains("mask_path") && j["mask_path"].is_string()) {
      e.mask_path = resolve(j["mask_path"].get<std::string>());
    }
    if (e.label == Label::manipulated && !e.mask_path) fail("manipulated entry has no mask_path");
    if (!fs::exists(e.image_path)) fail("image does not exist: " + e.image_path.string());
    if (e.mask_path && !fs::exists(*e.mask_path)) fail("mask does not exist: " + e.mask_path->string());
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  fs::create_directories(base);
  std::ofstream out(path);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  auto rel = [&](const fs::path& p) {
    const auto r = fs::absolute(p).lexically_relative(base);
    return (r.empty() ? p : r).generic_string();
  };
  for (const auto& e : manifest.entries) {
    nlohmann::json j;
    j["image_path"] = rel(e.image_path);
    j["mask_path"] = e.mask_path ? nlohmann::json(rel(*e.mask_path)) : nlohmann::json(nullptr);
    j["label"] = to_string(e.label);
    j["split"] = to_string(e.split);
    out << j.dump() << '\n';
  }
}

std::string source_id_of(const ManifestEntry& entry) { return entry.image_path.filename().string(); }

Sample load_sample(const ManifestEntry& entry) {
  Sample s;
  s.image = read_image(entry.image_path);
  s.source_id = source_id_of(entry);
  if (entry.mask_path) {
    s.mask = decode_mask(*entry.mask_path);
    if (s.mask.dim(1) != s.image.dim(1) || s.mask.dim(2) != s.image.dim(2)) {
      throw ManifestError("mask " + entry.mask_path->string() + " size differs from image " +
                          entry.image_path.string());
    }
  } else {
    s.mask = MaskTensor(Shape{1, s.image.dim(1), s.image.dim(2)});
  }
  return s;
}

}  // namespace imloc
