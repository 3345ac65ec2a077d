#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "imloc/image_io.hpp"
#include "imloc/manifest.hpp"
#include "imloc/morphology.hpp"
#include "imloc/robustness.hpp"
#include "oracles.hpp"

using namespace imloc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code;
  std::string output;
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const auto log = fs::path(IMLOC_TEST_TMP) / ("cli_log_" + std::to_string(counter++) + ".txt");
  fs::create_directories(log.parent_path());
  const std::string cmd = std::string(IMLOC_CLI) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, oracle::read_bytes(log)};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// One small dataset and a briefly trained checkpoint shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static fs::path root, data, run_dir;

  static void SetUpTestSuite() {
    root = oracle::temp_dir("cli_pipeline");
    data = root / "data";
    run_dir = root / "run";
    const auto s = run("synth --out " + q(data) + " --count 6 --height 64 --width 72 --seed 3 --test-fraction 0.34");
    ASSERT_EQ(s.code, 0) << s.output;
    const auto t = run("train --manifest " + q(data / "manifest.jsonl") + " --out " + q(run_dir) +
                       " --preset toy --set model.depth=2"
                       " --set model.global_block_indexes=[1] --set train.epochs=2 --set train.warmup_epochs=1 --set train.max_steps=3"
                       " --set train.micro_batch=1 --set train.accumulate=1 --quiet");
    ASSERT_EQ(t.code, 0) << t.output;
  }
};

fs::path CliPipeline::root, CliPipeline::data, CliPipeline::run_dir;

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("train --help").code, 0);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("edge-mask --mask /nonexistent/mask.png --out x.png").code, 1);
  const auto r = run("eval --ckpt /nonexistent --manifest /nonexistent.jsonl --report r.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.output.empty());
}

TEST(Cli, EdgeMaskMatchesReference) {
  const auto dir = oracle::temp_dir("cli_edge");
  const auto m = oracle::rect_mask(40, 50, 10, 12, 30, 33);
  write_mask_png(dir / "mask.png", m);
  const auto r = run("edge-mask --mask " + q(dir / "mask.png") + " --out " + q(dir / "edge.png") + " --k 2");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(decode_mask(dir / "edge.png"), oracle::edge(m, 2));
  const auto cfg = read_json(dir / "effective_config.json");
  EXPECT_EQ(cfg["command"], "edge-mask");
  EXPECT_EQ(cfg["k"], 2);

  // k = 0 picks the radius from the image size.
  ASSERT_EQ(run("edge-mask --mask " + q(dir / "mask.png") + " --out " + q(dir / "auto.png")).code, 0);
  EXPECT_EQ(decode_mask(dir / "auto.png"), oracle::edge(m, pick_k(m)));
}

TEST(Cli, SynthRefusesNonEmptyOutAndIsReproducible) {
  const auto dir = oracle::temp_dir("cli_synth");
  const std::string args = "synth --out " + q(dir / "d") + " --count 3 --height 48 --width 48 --seed 5";
  ASSERT_EQ(run(args).code, 0);
  const auto first = oracle::read_bytes(dir / "d" / "manifest.jsonl");
  const auto img = oracle::read_bytes(load_manifest(dir / "d" / "manifest.jsonl").entries.at(1).image_path);
  EXPECT_EQ(run(args).code, 1);
  ASSERT_EQ(run(args + " --overwrite").code, 0);
  EXPECT_EQ(oracle::read_bytes(dir / "d" / "manifest.jsonl"), first);
  const auto m = load_manifest(dir / "d" / "manifest.jsonl");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(oracle::read_bytes(m.entries.at(1).image_path), img);
  EXPECT_EQ(read_json(dir / "d" / "effective_config.json")["seed"], 5);
}

TEST(Cli, InvalidConfigValuesExitOne) {
  const auto dir = oracle::temp_dir("cli_badcfg");
  ASSERT_EQ(run("synth --out " + q(dir / "d") + " --count 2 --height 48 --width 48").code, 0);
  const auto m = q(dir / "d" / "manifest.jsonl");
  EXPECT_EQ(run("train --manifest " + m + " --out " + q(dir / "r") + " --preset nope").code, 1);
  EXPECT_EQ(run("train --manifest " + m + " --out " + q(dir / "r") + " --set train.base_lr=-1").code, 1);
  EXPECT_EQ(run("train --manifest " + m + " --out " + q(dir / "r") + " --set train").code, 1);
}

TEST_F(CliPipeline, TrainWritesCheckpointsAndConfigEcho) {
  EXPECT_TRUE(fs::exists(run_dir / "best" / "metadata.json"));
  EXPECT_TRUE(fs::exists(run_dir / "last" / "metadata.json"));
  EXPECT_TRUE(fs::exists(run_dir / "train_log.jsonl"));
  const auto cfg = read_json(run_dir / "effective_config.json");
  EXPECT_EQ(cfg["model"]["canvas"], json::array({128, 128}));
  EXPECT_EQ(cfg["model"]["depth"], 2);
  EXPECT_EQ(cfg["train"]["max_steps"], 3);
  const auto summary = read_json(run_dir / "summary.json");
  EXPECT_EQ(summary["stop_reason"], "max_steps");
  EXPECT_EQ(summary["steps"], 3);
  // A second train into the same directory needs --overwrite.
  EXPECT_EQ(run("train --manifest " + q(data / "manifest.jsonl") + " --out " + q(run_dir) + " --preset toy").code, 1);
}

TEST_F(CliPipeline, PredictWritesAllMapsAndIsIdempotent) {
  const auto manifest = load_manifest(data / "manifest.jsonl");
  const auto image = manifest.entries.at(0).image_path;
  const auto out = root / "pred";
  const std::string args = "predict --ckpt " + q(run_dir / "best") + " --image " + q(image) + " --out " + q(out);
  ASSERT_EQ(run(args).code, 0);
  const std::vector<std::string> expected{"prob.png",        "mask.png",        "overlay.png",
                                          "feat_vit.png",    "feat_sfpn_4.png", "feat_sfpn_2.png",
                                          "feat_sfpn_1.png", "feat_sfpn_05.png", "feat_sfpn_025.png"};
  for (const auto& f : expected) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto prob = read_image(out / "prob.png");
  EXPECT_EQ(prob.dim(1), 64);
  EXPECT_EQ(prob.dim(2), 72);
  const auto mask = decode_mask(out / "mask.png");
  EXPECT_EQ(mask.dim(1), 64);
  EXPECT_EQ(mask.dim(2), 72);
  EXPECT_EQ(read_json(out / "effective_config.json")["command"], "predict");

  const auto before = oracle::read_bytes(out / "prob.png");
  EXPECT_EQ(run(args).code, 1);
  ASSERT_EQ(run(args + " --overwrite").code, 0);
  EXPECT_EQ(oracle::read_bytes(out / "prob.png"), before);
}

TEST_F(CliPipeline, EvalReportsEverySplitImage) {
  const auto report = root / "eval" / "report.json";
  const auto r = run("eval --ckpt " + q(run_dir / "best") + " --manifest " + q(data / "manifest.jsonl") +
                     " --split test --report " + q(report));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = read_json(report);
  const auto n_test = load_manifest(data / "manifest.jsonl").counts().test;
  EXPECT_EQ(j["n_images"], n_test);
  EXPECT_GE(j["f1"].get<double>(), 0.0);
  EXPECT_LE(j["f1"].get<double>(), 1.0);
  EXPECT_EQ(read_json(root / "eval" / "effective_config.json")["split"], "test");
}

TEST_F(CliPipeline, AttackCurveAndViz) {
  const auto curve = root / "attack" / "blur.json";
  const auto r = run("attack --kind blur --levels 1,2 --ckpt " + q(run_dir / "best") + " --manifest " +
                     q(data / "manifest.jsonl") + " --out " + q(curve) + " --plot " + q(root / "attack" / "blur.png"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto c = read_json(curve).get<RobustnessCurve>();
  EXPECT_EQ(c.kind, AttackKind::gaussian_blur);
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_EQ(c.points[0].level, 1.0);
  EXPECT_EQ(c.points[1].level, 2.0);
  EXPECT_GT(c.baseline_f1, 0.0);
  EXPECT_TRUE(fs::exists(root / "attack" / "blur.png"));

  EXPECT_EQ(run("attack --kind jpeg --levels 0 --ckpt " + q(run_dir / "best") + " --manifest " +
                q(data / "manifest.jsonl") + " --out " + q(root / "attack" / "bad.json"))
                .code,
            1);

  const auto png = root / "viz" / "curve.png";
  ASSERT_EQ(run("viz --curve " + q(curve) + " --out " + q(png) + " --width 300 --height 200").code, 0);
  const auto img = read_image(png);
  EXPECT_EQ(img.dim(1), 200);
  EXPECT_EQ(img.dim(2), 300);
  ASSERT_EQ(run("viz --log " + q(run_dir / "train_log.jsonl") + " --out " + q(root / "viz" / "log.png")).code, 0);
  EXPECT_TRUE(fs::exists(root / "viz" / "log.png"));
  EXPECT_EQ(run("viz --out " + q(root / "viz" / "none.png")).code, 1);
}
