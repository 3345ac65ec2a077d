#include "imloc/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace imloc {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

namespace {

constexpr const char* kFormat = "imloc-checkpoint";

bool is_backbone_name(const std::string& n) {
  return n.rfind("patch_embed.", 0) == 0 || n == "pos_embed" || n.rfind("blocks.", 0) == 0 ||
         n.rfind("norm.", 0) == 0;
}

}  // namespace

void write_checkpoint(const fs::path& dir, const std::map<std::string, Tensor>& tensors, const nlohmann::json& extra) {
  fs::create_directories(dir / "tensors");
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["format"] = kFormat;
  meta["version"] = 1;
  auto& index = meta["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    const std::string file = "tensors/" + name + ".f32";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    index.push_back({{"name", name}, {"shape", t.shape()}, {"file", file}, {"dtype", "float32"}});
  }
  std::ofstream m(dir / "metadata.json");
  if (!m) throw CheckpointError("cannot write " + (dir / "metadata.json").string());
  m << meta.dump(2) << '\n';
}

CheckpointData read_checkpoint(const fs::path& dir) {
  std::ifstream m(dir / "metadata.json");
  if (!m) throw CheckpointError("no metadata.json in checkpoint " + dir.string());
  CheckpointData data;
  try {
    m >> data.metadata;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint metadata: " + std::string(e.what()));
  }
  if (data.metadata.value("format", std::string{}) != kFormat) {
    throw CheckpointError("not an imloc checkpoint: " + dir.string());
  }
  for (const auto& entry : data.metadata.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    Tensor t{shape};
    std::ifstream in(dir / entry.at("file").get<std::string>(), std::ios::binary);
    if (!in) throw CheckpointError("missing tensor blob for " + name);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(t.numel() * sizeof(float))) {
      throw CheckpointError("truncated tensor blob for " + name);
    }
    data.tensors.emplace(name, std::move(t));
  }
  return data;
}

std::map<std::string, Tensor> model_tensors(const Model& model) {
  std::map<std::string, Tensor> out;
  for (const auto& e : model.parameters().entries()) out.emplace(e.name, e.var.value());
  return out;
}

void save_model(const fs::path& dir, const Model& model, const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["model_config"] = model.config();
  write_checkpoint(dir, model_tensors(model), meta);
}

std::string LoadReport::summary() const {
  std::ostringstream os;
  os << loaded.size() << " loaded";
  auto list = [&](const char* what, const std::vector<std::string>& v) {
    if (v.empty()) return;
    os << "; " << v.size() << " " << what << ":";
    for (const auto& n : v) os << " " << n;
  };
  list("missing", missing);
  list("unexpected", unexpected);
  list("shape-mismatched", shape_mismatch);
  list("resampled", resampled);
  return os.str();
}

LoadReport load_tensors(ParameterStore& store, const std::map<std::string, Tensor>& tensors) {
  LoadReport r;
  for (auto& e : store.entries()) {
    auto it = tensors.find(e.name);
    if (it == tensors.end()) {
      r.missing.push_back(e.name);
    } else if (it->second.shape() != e.var.shape()) {
      r.shape_mismatch.push_back(e.name);
    } else {
      e.var.mutable_value() = it->second;
      r.loaded.push_back(e.name);
    }
  }
  for (const auto& [name, t] : tensors)
    if (!store.find(name)) r.unexpected.push_back(name);
  return r;
}

std::unique_ptr<Model> load_model(const fs::path& dir) {
  auto data = read_checkpoint(dir);
  if (!data.metadata.contains("model_config")) throw CheckpointError("checkpoint has no model_config");
  auto cfg = data.metadata.at("model_config").get<ModelConfig>();
  auto model = std::make_unique<Model>(cfg);
  const auto report = load_tensors(model->parameters(), data.tensors);
  if (!report.complete()) throw CheckpointError("incomplete checkpoint " + dir.string() + ": " + report.summary());
  return model;
}

namespace {

// Keys cubic convolution kernel, a = -0.5.
double cubic_weight(double t) {
  t = std::fabs(t);
  if (t <= 1) return 1.5 * t * t * t - 2.5 * t * t + 1;
  if (t < 2) return -0.5 * t * t * t + 2.5 * t * t - 4 * t + 2;
  return 0;
}

// Resamples along one axis. `at(i)` reads source sample i in [0, n);
// samples beyond the ends are extrapolated linearly so ramps stay exact.
template <typename Get>
double cubic_sample(Get&& at, std::int64_t n, double pos) {
  if (n == 1) return at(0);
  auto sample = [&](std::int64_t i) {
    if (i < 0) return at(0) + static_cast<double>(i) * (at(1) - at(0));
    if (i >= n) return at(n - 1) + static_cast<double>(i - n + 1) * (at(n - 1) - at(n - 2));
    return at(i);
  };
  const auto i0 = static_cast<std::int64_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i0);
  double acc = 0;
  for (std::int64_t k = -1; k <= 2; ++k) acc += cubic_weight(static_cast<double>(k) - f) * sample(i0 + k);
  return acc;
}

double corner_aligned(std::int64_t o, std::int64_t src, std::int64_t dst) {
  if (dst == 1) return 0;
  return static_cast<double>(o) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
}

}  // namespace

Tensor resample_grid_bicubic(const Tensor& grid, std::int64_t src_h, std::int64_t src_w, std::int64_t dst_h,
                             std::int64_t dst_w) {
  if (grid.rank() != 2 || grid.dim(0) != src_h * src_w) {
    throw ShapeError("resample_grid_bicubic: grid " + shape_str(grid.shape()) + " is not " + std::to_string(src_h) +
                     "x" + std::to_string(src_w));
  }
  const auto c = grid.dim(1);
  // Rows first, then columns, in double.
  std::vector<double> tmp(static_cast<std::size_t>(dst_h * src_w * c));
  for (std::int64_t y = 0; y < dst_h; ++y) {
    const double pos = corner_aligned(y, src_h, dst_h);
    for (std::int64_t x = 0; x < src_w; ++x)
      for (std::int64_t k = 0; k < c; ++k)
        tmp[static_cast<std::size_t>((y * src_w + x) * c + k)] =
            cubic_sample([&](std::int64_t i) { return static_cast<double>(grid[(i * src_w + x) * c + k]); }, src_h, pos);
  }
  Tensor out(Shape{dst_h * dst_w, c});
  for (std::int64_t y = 0; y < dst_h; ++y)
    for (std::int64_t x = 0; x < dst_w; ++x) {
      const double pos = corner_aligned(x, src_w, dst_w);
      for (std::int64_t k = 0; k < c; ++k)
        out[(y * dst_w + x) * c + k] = static_cast<float>(
            cubic_sample([&](std::int64_t i) { return tmp[static_cast<std::size_t>((y * src_w + i) * c + k)]; }, src_w, pos));
    }
  return out;
}

LoadReport load_pretrained(ParameterStore& store, const ModelConfig& cfg, const std::map<std::string, Tensor>& weights) {
  LoadReport r;
  for (auto& e : store.entries()) {
    if (!is_backbone_name(e.name)) continue;
    auto it = weights.find(e.name);
    if (it == weights.end()) {
      r.missing.push_back(e.name);
      continue;
    }
    const Tensor& src = it->second;
    if (src.shape() == e.var.shape()) {
      e.var.mutable_value() = src;
      r.loaded.push_back(e.name);
      continue;
    }
    if (e.name == "pos_embed") {
      const auto c = cfg.embed_dim;
      auto rows = src.numel() / std::max<std::int64_t>(1, c);
      if (src.numel() % c != 0 || src.dim(src.rank() - 1) != c) {
        r.shape_mismatch.push_back(e.name);
        continue;
      }
      Tensor flat = src.reshaped(Shape{rows, c});
      auto side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(rows))));
      if (side * side != rows) {
        // Drop a leading class-token row.
        side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(rows - 1))));
        if (side * side != rows - 1) {
          r.shape_mismatch.push_back(e.name);
          continue;
        }
        flat = Tensor(Shape{rows - 1, c},
                      std::vector<float>(flat.storage().begin() + c, flat.storage().end()));
      }
      e.var.mutable_value() = resample_grid_bicubic(flat, side, side, cfg.grid_h(), cfg.grid_w());
      r.loaded.push_back(e.name);
      r.resampled.push_back(e.name);
      continue;
    }
    r.shape_mismatch.push_back(e.name);
  }
  for (const auto& [name, t] : weights)
    if (!store.find(name) || !is_backbone_name(name)) r.unexpected.push_back(name);
  return r;
}

}  // namespace imloc
