#include "commands.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "imloc/checkpoint.hpp"
#include "imloc/evaluate.hpp"
#include "imloc/image_io.hpp"
#include "imloc/morphology.hpp"
#include "imloc/robustness.hpp"
#include "imloc/synth.hpp"
#include "imloc/trainer.hpp"
#include "imloc/viz.hpp"

namespace imloc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void prepare_out_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw std::invalid_argument("output path " + dir.string() + " exists and is not a directory");
  }
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!overwrite) throw std::invalid_argument("output directory " + dir.string() + " is not empty (pass --overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

fs::path parent_dir(const fs::path& file) {
  auto p = file.parent_path();
  return p.empty() ? fs::path(".") : p;
}

void echo_config(const fs::path& dir, const json& cfg) {
  fs::create_directories(dir);
  std::ofstream out(dir / "effective_config.json");
  out << cfg.dump(2) << '\n';
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(parent_dir(path));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

// "train.base_lr=3e-3" -> j["train"]["base_lr"] = 3e-3. Values are parsed
// as JSON when possible and kept as strings otherwise.
void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
  }
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  std::string pointer = "/";
  for (char c : key) pointer += c == '.' ? '/' : c;
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  j[json::json_pointer(pointer)] = value;
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw std::invalid_argument("invalid level '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::optional<Split> parse_split_option(const std::string& s) {
  if (s == "all") return std::nullopt;
  return parse_split(s);
}

SampleSet load_split(const fs::path& manifest_path, const std::string& split) {
  const auto manifest = load_manifest(manifest_path);
  auto set = SampleSet::from_manifest(manifest, parse_split_option(split), true,
                                      manifest_path.stem().string() + ":" + split);
  if (set.empty()) throw std::invalid_argument("no '" + split + "' entries in " + manifest_path.string());
  return set;
}

ByteTensor crop_map(const ByteTensor& map, std::int64_t h, std::int64_t w) {
  ByteTensor out(Shape{1, h, w});
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) out.at(0, y, x) = map.at(0, y, x);
  return out;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

// ---- train ----------------------------------------------------------------

CLI::App* add_train(CLI::App& app, TrainOptions& o) {
  auto* c = app.add_subcommand("train", "Train a model and keep the best checkpoint");
  c->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  c->add_option("--manifest", o.manifest, "Training manifest (its train split, or every entry)")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("--val-manifest", o.val_manifest, "Validation manifest (defaults to the test split of --manifest)")
      ->check(CLI::ExistingFile);
  c->add_option("--out", o.out, "Output directory")->required();
  c->add_option("--preset", o.preset, "Model preset (vit-base, toy)");
  c->add_option("--set", o.overrides, "Override a config value, e.g. --set train.base_lr=3e-3");
  c->add_option("--edge-lambda", o.edge_lambda, "Edge loss weight");
  c->add_option("--pretrained", o.pretrained, "Checkpoint directory with encoder weights")->check(CLI::ExistingDirectory);
  c->add_flag("--resume", o.resume, "Continue from <out>/last");
  c->add_flag("--overwrite", o.overwrite, "Replace an existing output directory");
  c->add_flag("--quiet", o.quiet, "Only print evaluations");
  return c;
}

int run_train(const TrainOptions& o) {
  json j = o.config.empty() ? json::object() : read_json(o.config);
  if (!o.preset.empty()) j["model"]["preset"] = o.preset;
  for (const auto& s : o.overrides) apply_override(j, s);
  if (o.edge_lambda) j["loss"]["lambda"] = *o.edge_lambda;
  const auto rc = j.get<RunConfig>();
  rc.model.validate();
  rc.loss.validate();
  rc.train.validate();

  if (o.resume) {
    if (!fs::exists(o.out / "last" / "metadata.json")) {
      throw std::invalid_argument("nothing to resume in " + o.out.string());
    }
  } else {
    prepare_out_dir(o.out, o.overwrite);
  }
  echo_config(o.out, rc);

  auto train_manifest = load_manifest(o.manifest);
  const bool has_train_split = train_manifest.counts().train > 0;
  auto train_set = SampleSet::from_manifest(train_manifest, has_train_split ? std::optional<Split>(Split::train) : std::nullopt,
                                            true, "train");
  SampleSet val_set = o.val_manifest.empty()
                          ? SampleSet::from_manifest(train_manifest, Split::test, true, "val")
                          : SampleSet::from_manifest(load_manifest(o.val_manifest), std::nullopt, true, "val");
  if (val_set.empty()) throw std::invalid_argument("no validation samples: pass --val-manifest or add a test split");

  Model model(rc.model, rc.train.seed);
  if (!o.pretrained.empty()) {
    const auto report = load_pretrained(model.parameters(), rc.model, read_checkpoint(o.pretrained).tensors);
    std::cout << "pretrained: " << report.summary() << '\n';
  }
  std::cout << "model: " << model.parameters().parameter_count() << " parameters, canvas " << rc.model.canvas_h << "x"
            << rc.model.canvas_w << "; train " << train_set.size() << ", val " << val_set.size() << '\n';

  Trainer trainer(model, rc.train, rc.loss);
  FitOptions fo;
  fo.out_dir = o.out;
  fo.resume = o.resume;
  if (!o.quiet) {
    fo.on_step = [](const StepRecord& r) {
      std::cout << "step " << r.step << " epoch " << r.epoch << " lr " << std::setprecision(3) << r.lr << " loss "
                << std::setprecision(5) << r.loss.total << " (seg " << r.loss.seg << ", edge " << r.loss.edge << ")\n";
    };
  }
  fo.on_eval = [](const EvalRecord& r) {
    std::cout << "eval epoch " << r.epoch << " step " << r.step << " f1 " << std::setprecision(4) << r.f1;
    if (r.auc) std::cout << " auc " << *r.auc;
    std::cout << (r.improved ? " *" : "") << '\n';
  };
  const auto result = trainer.fit(train_set, val_set, fo);
  write_json(o.out / "summary.json", {{"stop_reason", result.stop_reason},
                                      {"best_f1", result.best_f1},
                                      {"steps", result.state.step},
                                      {"epochs_completed", result.state.epoch},
                                      {"best_checkpoint", result.best_checkpoint.string()}});
  std::cout << "stopped (" << result.stop_reason << ") after " << result.state.step << " steps; best f1 "
            << result.best_f1 << " saved to " << result.best_checkpoint.string() << '\n';
  return 0;
}

// ---- eval -----------------------------------------------------------------

CLI::App* add_eval(CLI::App& app, EvalOptions& o) {
  auto* c = app.add_subcommand("eval", "Pixel F1 at 0.5 and AUC over a manifest split");
  c->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  c->add_option("--manifest", o.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  c->add_option("--split", o.split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  c->add_option("--report", o.report, "Report JSON path")->required();
  return c;
}

int run_eval(const EvalOptions& o) {
  auto model = load_model(o.ckpt);
  const auto set = load_split(o.manifest, o.split);
  const auto report = evaluate_dataset(*model, set);
  fs::create_directories(parent_dir(o.report));
  std::ofstream(o.report) << report.to_json() << '\n';
  echo_config(parent_dir(o.report), {{"command", "eval"},
                                     {"ckpt", fs::absolute(o.ckpt).string()},
                                     {"manifest", fs::absolute(o.manifest).string()},
                                     {"split", o.split},
                                     {"model", model->config()}});
  std::cout << report.dataset << ": " << report.n_images() << " images, f1 " << report.dataset_f1();
  if (auto a = report.dataset_auc()) std::cout << ", auc " << *a << " (" << report.n_auc_defined() << " defined)";
  std::cout << '\n';
  return 0;
}

// ---- predict --------------------------------------------------------------

CLI::App* add_predict(CLI::App& app, PredictOptions& o) {
  auto* c = app.add_subcommand("predict", "Localize manipulations in one image");
  c->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  c->add_option("--image", o.image, "Input image")->required()->check(CLI::ExistingFile);
  c->add_option("--out", o.out, "Output directory")->required();
  c->add_option("--threshold", o.threshold, "Mask threshold")->check(CLI::Range(0.0, 1.0));
  c->add_flag("--overwrite", o.overwrite, "Replace an existing output directory");
  return c;
}

int run_predict(const PredictOptions& o) {
  auto model = load_model(o.ckpt);
  const Tensor image = read_image(o.image);
  Sample sample{image, MaskTensor(Shape{1, image.dim(1), image.dim(2)}), o.image.filename().string()};
  const auto padded = pad_to_canvas(sample, model->canvas(), model->config().patch_size);
  prepare_out_dir(o.out, o.overwrite);

  ag::NoGradGuard no_grad;
  const auto fwd = model->forward(padded.image, false);
  const Tensor prob = crop_to_content(sigmoid(fwd.logits_full.value()), padded);
  MaskTensor mask(prob.shape());
  for (std::int64_t i = 0; i < prob.numel(); ++i) mask[i] = prob[i] >= o.threshold ? 1 : 0;

  write_probability_png(o.out / "prob.png", prob);
  write_mask_png(o.out / "mask.png", mask);
  write_rgb_png(o.out / "overlay.png", overlay_prediction(image, prob, o.threshold));
  auto feature_png = [&](const std::string& name, const FeatureMap& fm) {
    const auto h = std::min(fm.data.dim(1), ceil_div(padded.content_h, fm.stride));
    const auto w = std::min(fm.data.dim(2), ceil_div(padded.content_w, fm.stride));
    write_gray_png(o.out / name, crop_map(visualize_feature_map(fm), h, w));
  };
  feature_png("feat_vit.png", fwd.backbone);
  for (std::size_t i = 0; i < fwd.pyramid.maps.size(); ++i) {
    feature_png("feat_sfpn_" + std::string(kPyramidScaleNames[i]) + ".png", fwd.pyramid.maps[i]);
  }
  echo_config(o.out, {{"command", "predict"},
                      {"ckpt", fs::absolute(o.ckpt).string()},
                      {"image", fs::absolute(o.image).string()},
                      {"threshold", o.threshold},
                      {"model", model->config()}});
  std::int64_t positive = 0;
  for (std::int64_t i = 0; i < mask.numel(); ++i) positive += mask[i];
  std::cout << "wrote predictions to " << o.out.string() << " (" << positive << " of " << mask.numel()
            << " pixels flagged)\n";
  return 0;
}

// ---- attack ---------------------------------------------------------------

CLI::App* add_attack(CLI::App& app, AttackOptions& o) {
  auto* c = app.add_subcommand("attack", "F1 under JPEG compression or Gaussian blur");
  c->add_option("--kind", o.kind, "jpeg or gaussian_blur")->check(CLI::IsMember({"jpeg", "gaussian_blur", "blur"}));
  c->add_option("--levels", o.levels, "Comma-separated qualities or sigmas (default sweep when omitted)");
  c->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  c->add_option("--manifest", o.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  c->add_option("--split", o.split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  c->add_option("--out", o.out, "Curve JSON path")->required();
  c->add_option("--plot", o.plot, "Also render the curve to this PNG");
  return c;
}

namespace {

Tensor plot_curves(const std::vector<RobustnessCurve>& curves, int width, int height) {
  static const std::array<std::array<float, 3>, 4> palette{{{0.1f, 0.3f, 0.8f}, {0.1f, 0.6f, 0.2f},
                                                            {0.6f, 0.2f, 0.7f}, {0.9f, 0.5f, 0.1f}}};
  std::vector<PlotSeries> series;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    PlotSeries s;
    s.color = palette[i % palette.size()];
    for (const auto& p : curves[i].points) {
      s.x.push_back(p.level);
      s.y.push_back(p.dataset_f1);
    }
    if (!s.x.empty()) {
      const auto [lo, hi] = std::minmax_element(s.x.begin(), s.x.end());
      PlotSeries base;
      base.x = {*lo, *hi};
      base.y = {curves[i].baseline_f1, curves[i].baseline_f1};
      base.color = {0.85f, 0.1f, 0.1f};
      base.dashed = true;
      base.markers = false;
      series.push_back(base);
    }
    series.push_back(std::move(s));
  }
  PlotOptions opts;
  opts.width = width;
  opts.height = height;
  opts.y_range = std::array<double, 2>{0.0, 1.0};
  return render_plot(series, opts);
}

}  // namespace

int run_attack(const AttackOptions& o) {
  const auto kind = parse_attack_kind(o.kind);
  AttackSpec spec = o.levels.empty() ? AttackSpec::defaults(kind) : AttackSpec{kind, parse_levels(o.levels)};
  spec.validate();
  auto model = load_model(o.ckpt);
  const auto set = load_split(o.manifest, o.split);
  const auto curve = sweep(*model, set, spec);
  write_json(o.out, curve);
  if (!o.plot.empty()) {
    fs::create_directories(parent_dir(o.plot));
    write_rgb_png(o.plot, plot_curves({curve}, 640, 480));
  }
  echo_config(parent_dir(o.out), {{"command", "attack"},
                                  {"kind", to_string(kind)},
                                  {"levels", spec.levels},
                                  {"ckpt", fs::absolute(o.ckpt).string()},
                                  {"manifest", fs::absolute(o.manifest).string()},
                                  {"split", o.split},
                                  {"model", model->config()}});
  std::cout << to_string(kind) << " on " << curve.dataset << " (all-positive baseline " << curve.baseline_f1 << ")\n";
  for (const auto& p : curve.points) std::cout << "  level " << p.level << ": f1 " << p.dataset_f1 << '\n';
  return 0;
}

// ---- edge-mask ------------------------------------------------------------

CLI::App* add_edge_mask(CLI::App& app, EdgeMaskOptions& o) {
  auto* c = app.add_subcommand("edge-mask", "Boundary band of a binary mask");
  c->add_option("--mask", o.mask, "Mask image (pixels > 127 are set)")->required()->check(CLI::ExistingFile);
  c->add_option("--out", o.out, "Output PNG")->required();
  c->add_option("--k", o.k, "Structuring element radius (0 picks from the image size)")->check(CLI::NonNegativeNumber);
  return c;
}

int run_edge_mask(const EdgeMaskOptions& o) {
  const auto mask = decode_mask(o.mask);
  const int k = o.k > 0 ? o.k : pick_k(mask);
  const auto edge = edge_mask(mask, k);
  fs::create_directories(parent_dir(o.out));
  write_mask_png(o.out, edge.data);
  echo_config(parent_dir(o.out), {{"command", "edge-mask"}, {"mask", fs::absolute(o.mask).string()}, {"k", k}});
  std::cout << "k=" << k << ", " << count_true(edge.data) << " band pixels\n";
  return 0;
}

// ---- viz ------------------------------------------------------------------

CLI::App* add_viz(CLI::App& app, VizOptions& o) {
  auto* c = app.add_subcommand("viz", "Render robustness curves or a training log");
  auto* curve = c->add_option("--curve", o.curves, "Curve JSON written by attack (repeatable)")->check(CLI::ExistingFile);
  auto* log = c->add_option("--log", o.log, "train_log.jsonl written by train")->check(CLI::ExistingFile);
  curve->excludes(log);
  c->add_option("--out", o.out, "Output PNG")->required();
  c->add_option("--width", o.width, "Image width")->check(CLI::Range(100, 4096));
  c->add_option("--height", o.height, "Image height")->check(CLI::Range(80, 4096));
  return c;
}

int run_viz(const VizOptions& o) {
  if (o.curves.empty() && o.log.empty()) throw std::invalid_argument("viz needs --curve or --log");
  fs::create_directories(parent_dir(o.out));
  json echo = {{"command", "viz"}, {"width", o.width}, {"height", o.height}};
  if (!o.curves.empty()) {
    std::vector<RobustnessCurve> curves;
    for (const auto& p : o.curves) curves.push_back(read_json(p).get<RobustnessCurve>());
    write_rgb_png(o.out, plot_curves(curves, o.width, o.height));
    echo["curves"] = json::array();
    for (const auto& p : o.curves) echo["curves"].push_back(fs::absolute(p).string());
  } else {
    PlotSeries loss, f1;
    f1.color = {0.1f, 0.6f, 0.2f};
    loss.markers = false;
    std::ifstream in(o.log);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto r = json::parse(line);
      if (r.at("type") == "step") {
        loss.x.push_back(r.at("step").get<double>());
        loss.y.push_back(r.at("loss").get<double>());
      } else if (r.at("type") == "eval") {
        f1.x.push_back(r.at("step").get<double>());
        f1.y.push_back(r.at("f1").get<double>());
      }
    }
    PlotOptions opts;
    opts.width = o.width;
    opts.height = o.height;
    write_rgb_png(o.out, render_plot({loss}, opts));
    if (!f1.x.empty()) {
      opts.y_range = std::array<double, 2>{0.0, 1.0};
      auto f1_path = o.out;
      f1_path.replace_filename(o.out.stem().string() + "_f1" + o.out.extension().string());
      write_rgb_png(f1_path, render_plot({f1}, opts));
      std::cout << "wrote " << f1_path.string() << '\n';
    }
    echo["log"] = fs::absolute(o.log).string();
  }
  echo_config(parent_dir(o.out), echo);
  std::cout << "wrote " << o.out.string() << '\n';
  return 0;
}

// ---- synth ----------------------------------------------------------------

CLI::App* add_synth(CLI::App& app, SynthOptions& o) {
  auto* c = app.add_subcommand("synth", "Generate a synthetic tampering dataset with a manifest");
  c->add_option("--out", o.out, "Output directory")->required();
  c->add_option("--count", o.count, "Number of images")->check(CLI::PositiveNumber);
  c->add_option("--height", o.height, "Image height")->check(CLI::Range(32, 8192));
  c->add_option("--width", o.width, "Image width")->check(CLI::Range(32, 8192));
  c->add_option("--seed", o.seed, "Random seed");
  c->add_option("--authentic-fraction", o.authentic_fraction, "Share of untouched images")->check(CLI::Range(0.0, 1.0));
  c->add_option("--test-fraction", o.test_fraction, "Share assigned to the test split")->check(CLI::Range(0.0, 1.0));
  c->add_option("--align", o.align, "Snap tampered rectangles to this grid")->check(CLI::PositiveNumber);
  c->add_flag("--overwrite", o.overwrite, "Replace an existing output directory");
  return c;
}

int run_synth(const SynthOptions& o) {
  imloc::SynthOptions so;
  so.count = o.count;
  so.height = o.height;
  so.width = o.width;
  so.seed = o.seed;
  so.authentic_fraction = o.authentic_fraction;
  so.test_fraction = o.test_fraction;
  so.tamper.align = o.align;
  prepare_out_dir(o.out, o.overwrite);
  const auto manifest = generate_synthetic_dataset(o.out, so);
  const auto counts = manifest.counts();
  echo_config(o.out, {{"command", "synth"},
                      {"count", o.count},
                      {"height", o.height},
                      {"width", o.width},
                      {"seed", o.seed},
                      {"authentic_fraction", o.authentic_fraction},
                      {"test_fraction", o.test_fraction},
                      {"align", o.align}});
  std::cout << "wrote " << manifest.size() << " images (" << counts.manipulated << " manipulated, " << counts.train
            << " train, " << counts.test << " test) to " << o.out.string() << '\n';
  return 0;
}

}  // namespace imloc::cli
