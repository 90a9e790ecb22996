// Serial reference vs OpenMP paths for the hot kernels. Run with
// --benchmark_filter=... ; the Exec argument is 0 for serial and 1 for parallel.

#include <benchmark/benchmark.h>

#include <vector>

#include "cryptoens/features.hpp"
#include "cryptoens/kernels.hpp"
#include "cryptoens/network.hpp"
#include "cryptoens/rng.hpp"
#include "support.hpp"

using namespace cryptoens;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    nn::kernels::matmul(exec_of(state), a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_matmul)->ArgsProduct({{0, 1}, {64, 256}});

void BM_forward_backward(benchmark::State& state) {
  const nn::NetShape shape;  // 12 x 66 input, hidden 64
  const auto w = nn::xavier_init(shape, 3);
  const auto batch = static_cast<std::size_t>(state.range(1));
  const auto x = random_vec(batch * shape.seq_len * shape.input_dim, 4);
  nn::HeadGradients g;
  g.mu = random_vec(batch * shape.actions, 5);
  g.sigma = random_vec(batch * shape.actions, 6);
  g.value = random_vec(batch, 7);
  for (auto _ : state) {
    nn::ForwardTrace tr;
    nn::forward(w, x, batch, nn::Mode::Train, exec_of(state), &tr);
    benchmark::DoNotOptimize(nn::backward(w, tr, g, exec_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_forward_backward)->ArgsProduct({{0, 1}, {64, 512}})->Unit(benchmark::kMillisecond);

void BM_build_features(benchmark::State& state) {
  std::vector<market::AssetSeries> assets;
  for (std::uint64_t s = 0; s < 5; ++s) assets.push_back(testing_support::random_series(8760, s));
  for (auto _ : state) benchmark::DoNotOptimize(market::build_features(assets, {}, exec_of(state)));
}
BENCHMARK(BM_build_features)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
