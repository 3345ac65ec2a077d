#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace imloc::cli {

struct TrainOptions {
  std::filesystem::path config, manifest, val_manifest, out, pretrained;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<double> edge_lambda;
  bool resume = false, overwrite = false, quiet = false;
};

struct EvalOptions {
  std::filesystem::path ckpt, manifest, report;
  std::string split = "all";
};

struct PredictOptions {
  std::filesystem::path ckpt, image, out;
  double threshold = 0.5;
  bool overwrite = false;
};

struct AttackOptions {
  std::string kind = "jpeg", levels, split = "all";
  std::filesystem::path ckpt, manifest, out, plot;
};

struct EdgeMaskOptions {
  std::filesystem::path mask, out;
  int k = 0;
};

struct VizOptions {
  std::vector<std::filesystem::path> curves;
  std::filesystem::path log, out;
  int width = 640, height = 480;
};

struct SynthOptions {
  std::filesystem::path out;
  std::size_t count = 16;
  std::int64_t height = 128, width = 128, align = 1;
  std::uint64_t seed = 0;
  double authentic_fraction = 0, test_fraction = 0;
  bool overwrite = false;
};

CLI::App* add_train(CLI::App& app, TrainOptions& o);
CLI::App* add_eval(CLI::App& app, EvalOptions& o);
CLI::App* add_predict(CLI::App& app, PredictOptions& o);
CLI::App* add_attack(CLI::App& app, AttackOptions& o);
CLI::App* add_edge_mask(CLI::App& app, EdgeMaskOptions& o);
CLI::App* add_viz(CLI::App& app, VizOptions& o);
CLI::App* add_synth(CLI::App& app, SynthOptions& o);

int run_train(const TrainOptions& o);
int run_eval(const EvalOptions& o);
int run_predict(const PredictOptions& o);
int run_attack(const AttackOptions& o);
int run_edge_mask(const EdgeMaskOptions& o);
int run_viz(const VizOptions& o);
int run_synth(const SynthOptions& o);

}  // namespace imloc::cli
