#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "benford/attacks.hpp"
#include "benford/detector.hpp"
#include "benford/imaging.hpp"
#include "benford/tinynet.hpp"

namespace {

using namespace benford;

ImageTensor noise_image(std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(side * side);
  for (auto& v : px) v = u(rng);
  return ImageTensor(side, side, 1, std::move(px), Scale::Unit);
}

nn::Model desk_model() {
  nn::Model m = nn::Model::desk_cnn();
  m.initialize(1);
  return m;
}

void BM_Convolve(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const ImageTensor x = noise_image(side, 1).to_eight_bit();
  const Kernel k = Kernel::sobel_horizontal();
  for (auto _ : state) benchmark::DoNotOptimize(convolve2d(x, k));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(side * side));
}
BENCHMARK(BM_Convolve)->Arg(28)->Arg(64)->Arg(256);

void BM_GradientMagnitude(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const ImageTensor x = noise_image(side, 2).to_eight_bit();
  for (auto _ : state) benchmark::DoNotOptimize(gradient_magnitude(x));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(side * side));
}
BENCHMARK(BM_GradientMagnitude)->Arg(28)->Arg(64)->Arg(256);

void BM_ScoreImage(benchmark::State& state) {
  const ImageTensor x = noise_image(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(score_image(x));
}
BENCHMARK(BM_ScoreImage)->Arg(28)->Arg(64);

void BM_Forward(benchmark::State& state) {
  const nn::Model m = desk_model();
  const ImageTensor x = noise_image(28, 4);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
}
BENCHMARK(BM_Forward);

void BM_Backward(benchmark::State& state) {
  const nn::Model m = desk_model();
  const ImageTensor x = noise_image(28, 5);
  std::vector<double> grad(m.parameter_count());
  for (auto _ : state) benchmark::DoNotOptimize(m.backward(x, 3, grad, true));
}
BENCHMARK(BM_Backward);

void BM_Pgd(benchmark::State& state) {
  const nn::Model m = desk_model();
  const ImageTensor x = noise_image(28, 6);
  AttackConfig c = AttackConfig::pgd(state.range(0) == 0 ? Norm::Linf : Norm::L2, state.range(0) == 0 ? 0.2 : 2.0);
  c.early_stop = false;
  c.max_iters = 10;
  for (auto _ : state) benchmark::DoNotOptimize(pgd(m, x, 0, c));
}
BENCHMARK(BM_Pgd)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SeparationSweep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> clean(n), adv(n);
  for (auto& v : clean) v = g(rng);
  for (auto& v : adv) v = g(rng) + 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(separation_sweep(clean, adv));
  state.SetComplexityN(static_cast<int64_t>(n));
}
BENCHMARK(BM_SeparationSweep)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oNLogN);

}  // namespace

BENCHMARK_MAIN();
