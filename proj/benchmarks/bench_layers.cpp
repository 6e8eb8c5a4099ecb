#include <benchmark/benchmark.h>

#include <random>

#include "siamtrack/cf.hpp"
#include "siamtrack/net/layers.hpp"

namespace {

using namespace siamtrack;

Tensor noise(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(s);
  for (double& v : t.values()) v = n(rng);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto spec = net::LayerSpec::conv("c", 3, 1, 32);
  const Tensor x = noise({1, side, side, 16}, 1);
  const Tensor w = noise({3, 3, 16, 32}, 2);
  const Tensor b({1, 1, 1, 32});
  for (auto _ : state) {
    net::Graph g(false);
    benchmark::DoNotOptimize(g.value(net::conv2d(g, g.constant(x), g.constant(w), g.constant(b), spec)));
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto spec = net::LayerSpec::conv("c", 3, 1, 32);
  net::Param x("x", {1, side, side, 16}), w("w", {3, 3, 16, 32}), b("b", {1, 1, 1, 32});
  x.value = noise(x.value.shape(), 3);
  w.value = noise(w.value.shape(), 4);
  for (auto _ : state) {
    net::Graph g;
    g.backward(net::conv2d(g, g.param(x), g.param(w), g.param(b), spec));
    benchmark::DoNotOptimize(w.grad.data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_SolveCF(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Tensor x = noise({1, m, m, static_cast<std::size_t>(state.range(1))}, 5);
  const cf::CFConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(cf::solve_cf_forward(x, cfg.lambda(m), cfg.sigma(m)));
}
BENCHMARK(BM_SolveCF)->Args({4, 32})->Args({7, 256})->Unit(benchmark::kMicrosecond);

void BM_CrossCorrelate(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const Tensor w = noise({1, m, m, 32}, 6);
  const Tensor z = noise({3, n, n, 32}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(cf::cross_correlate_forward(w, z));
}
BENCHMARK(BM_CrossCorrelate)->Args({4, 28})->Args({7, 49})->Unit(benchmark::kMicrosecond);

}  // namespace
