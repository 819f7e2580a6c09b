#include <benchmark/benchmark.h>

#include "ppkit/kernels.hpp"
#include "ppkit/losses.hpp"
#include "ppkit/models.hpp"
#include "ppkit/random.hpp"
#include "ppkit/tiling.hpp"

namespace {

using namespace ppkit;

Tensor4f random_tensor(const Dims4& d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4f t(d);
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_Conv2d3x3(benchmark::State& state) {
  const auto width = state.range(0);
  const Tensor4f x = random_tensor({1, width, 96, 96}, 1);
  const Tensor4f k = random_tensor({width, width, 3, 3}, 2);
  const Tensor4f b = random_tensor({1, width, 1, 1}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, b, 1, Padding::kSame));
  state.SetItemsProcessed(state.iterations() * 96 * 96 * width * width * 9);
}
BENCHMARK(BM_Conv2d3x3)->Arg(16)->Arg(64);

void BM_GeneratorForward(benchmark::State& state) {
  GeneratorConfig cfg;
  cfg.num_residual_blocks = state.range(0);
  cfg.feature_width = 16;
  cfg.input_block_size = 96;
  const auto params = generator_init<float>(cfg, 4);
  const Tensor4f x = random_tensor({1, 3, 96, 96}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(generator_forward(cfg, params, x));
}
BENCHMARK(BM_GeneratorForward)->Arg(2)->Arg(8);

void BM_TrainStepL1(benchmark::State& state) {
  GeneratorConfig cfg;
  cfg.num_residual_blocks = 2;
  cfg.feature_width = 16;
  cfg.input_block_size = 96;
  const auto params = generator_init<float>(cfg, 6);
  const Tensor4f x = random_tensor({1, 3, 96, 96}, 7);
  const Tensor4f t = random_tensor({1, 3, 96, 96}, 8);
  for (auto _ : state) {
    Tape<float> tape;
    const auto out = generator_forward_tape(tape, cfg, params, tape.constant(x));
    const auto loss = l1_loss_tape(tape, out, tape.constant(t));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.parameter_grad("g.in.conv.w"));
  }
}
BENCHMARK(BM_TrainStepL1);

void BM_Ssim(benchmark::State& state) {
  const Tensor4f a = random_tensor({1, 3, 96, 96}, 9);
  const Tensor4f b = random_tensor({1, 3, 96, 96}, 10);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_MsSsim(benchmark::State& state) {
  const Tensor4f a = random_tensor({1, 3, 96, 96}, 11);
  const Tensor4f b = random_tensor({1, 3, 96, 96}, 12);
  for (auto _ : state) benchmark::DoNotOptimize(ms_ssim(a, b));
}
BENCHMARK(BM_MsSsim);

void BM_TilingRoundTrip(benchmark::State& state) {
  const std::int64_t w = 1920, h = 1080;
  RgbImage img;
  img.width = w;
  img.height = h;
  Rng rng(13);
  for (auto* plane : {&img.r, &img.g, &img.b}) {
    plane->resize(static_cast<std::size_t>(w * h));
    for (auto& v : *plane) v = static_cast<float>(rng.uniform(0.0, 1.0));
  }
  const BlockGrid grid = plan_blocks(w, h);
  for (auto _ : state) {
    const Tensor4f blocks = extract_blocks(img, grid);
    benchmark::DoNotOptimize(aggregate_blocks(blocks, grid));
  }
}
BENCHMARK(BM_TilingRoundTrip);

}  // namespace

BENCHMARK_MAIN();
