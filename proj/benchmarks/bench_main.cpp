#include <benchmark/benchmark.h>

#include "imloc/loss.hpp"
#include "imloc/metrics.hpp"
#include "imloc/image_ops.hpp"
#include "imloc/model.hpp"
#include "imloc/ops.hpp"
#include "imloc/rng.hpp"
#include "imloc/trainer.hpp"

using namespace imloc;

namespace {

Tensor uniform(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(s));
  for (auto& v : t.storage()) v = static_cast<float>(rng.uniform());
  return t;
}

MaskTensor rect(std::int64_t side) {
  MaskTensor m(Shape{1, side, side});
  for (std::int64_t y = side / 4; y < side / 2; ++y)
    for (std::int64_t x = side / 3; x < 3 * side / 4; ++x) m.at(0, y, x) = 1;
  return m;
}

void BM_EdgeMask(benchmark::State& st) {
  const auto m = rect(st.range(0));
  const int k = pick_k(m);
  for (auto _ : st) benchmark::DoNotOptimize(edge_mask(m, k));
  st.SetItemsProcessed(st.iterations() * m.numel());
}
BENCHMARK(BM_EdgeMask)->Arg(256)->Arg(1024);

void BM_Conv3x3(benchmark::State& st) {
  const auto c = st.range(0);
  const auto x = ag::constant(uniform({c, 64, 64}, 1));
  const auto w = ag::constant(uniform({c, c, 3, 3}, 2));
  const auto b = ag::constant(Tensor(Shape{c}));
  ag::NoGradGuard ng;
  for (auto _ : st) benchmark::DoNotOptimize(ag::conv2d(x, w, b, 1));
}
BENCHMARK(BM_Conv3x3)->Arg(32)->Arg(64);

void BM_AttentionBlock(benchmark::State& st) {
  const auto mode = st.range(0) ? AttentionMode::global : AttentionMode::windowed;
  Model m(ModelConfig::toy(), 0);
  const auto x = m.backbone().patch_embed(uniform({3, 128, 128}, 3));
  ag::NoGradGuard ng;
  for (auto _ : st) benchmark::DoNotOptimize(m.backbone().attention_block(0, x, mode));
}
BENCHMARK(BM_AttentionBlock)->Arg(0)->Arg(1);

void BM_ToyEncode(benchmark::State& st) {
  Model m(ModelConfig::toy(), 0);
  const auto img = uniform({3, 128, 128}, 4);
  ag::NoGradGuard ng;
  for (auto _ : st) benchmark::DoNotOptimize(m.backbone().encode(img));
}
BENCHMARK(BM_ToyEncode)->Unit(benchmark::kMillisecond);

void BM_ToyTrainStep(benchmark::State& st) {
  Model m(ModelConfig::toy(), 0);
  TrainConfig tc;
  tc.micro_batch = 1;
  tc.accumulate = 1;
  Trainer tr(m, tc, LossConfig{});
  const Sample s{uniform({3, 128, 128}, 5), rect(128), "bench"};
  for (auto _ : st) benchmark::DoNotOptimize(tr.train_step({s}, 1e-4));
}
BENCHMARK(BM_ToyTrainStep)->Unit(benchmark::kMillisecond);

void BM_PixelAuc(benchmark::State& st) {
  const auto side = st.range(0);
  const auto p = uniform({1, side, side}, 6);
  const auto m = rect(side);
  for (auto _ : st) benchmark::DoNotOptimize(auc(p, m));
  st.SetItemsProcessed(st.iterations() * p.numel());
}
BENCHMARK(BM_PixelAuc)->Arg(256)->Arg(1024);

void BM_GaussianBlur(benchmark::State& st) {
  const auto img = uniform({3, 512, 512}, 7);
  for (auto _ : st) benchmark::DoNotOptimize(gaussian_blur(img, static_cast<double>(st.range(0))));
}
BENCHMARK(BM_GaussianBlur)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
