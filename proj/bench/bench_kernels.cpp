// Serial reference vs OpenMP kernels, and a full forward pass on each backend.

#include <benchmark/benchmark.h>

#include <random>

#include "gdiff/denoiser.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/kernels.hpp"

using namespace gdiff;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <kernels::Backend B>
void BM_LinearForward(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const int width = static_cast<int>(state.range(1));
  const auto x = random_vec(static_cast<std::size_t>(rows) * width, 1);
  const auto w = random_vec(static_cast<std::size_t>(width) * width, 2);
  const auto b = random_vec(width, 3);
  std::vector<double> y(static_cast<std::size_t>(rows) * width);
  const auto& k = kernels::kernel_set(B);
  for (auto _ : state) {
    k.linear_forward(x, w, b, y, rows, width, width);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * rows * width * width);
}

struct BenchGraph {
  ProblemGraph graph;
  GraphBatch batch;
};

BenchGraph tsp_graph(int n, int k) {
  const auto inst = generate_tsp(n, 7);
  BenchGraph g;
  g.graph = make_tsp_graph(inst, sparsify(inst, k));
  g.batch = make_batch(g.graph, 500);
  return g;
}

template <kernels::Backend B>
void BM_GatedAggregate(benchmark::State& state) {
  const auto g = tsp_graph(static_cast<int>(state.range(0)), 20);
  const int d = static_cast<int>(state.range(1));
  const auto gate = random_vec(static_cast<std::size_t>(g.batch.num_edges()) * d, 4);
  const auto vh = random_vec(static_cast<std::size_t>(g.batch.num_nodes) * d, 5);
  std::vector<double> out(static_cast<std::size_t>(g.batch.num_nodes) * d);
  const auto& k = kernels::kernel_set(B);
  for (auto _ : state) {
    k.gated_aggregate(gate, vh, g.batch.by_src, g.batch.dst, out, d);
    benchmark::DoNotOptimize(out.data());
  }
}

template <kernels::Backend B>
void BM_Forward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.layers = 4;
  cfg.width = static_cast<int>(state.range(1));
  const auto params = init_params(cfg, 1);
  const auto g = tsp_graph(static_cast<int>(state.range(0)), 20);
  const auto xt = random_vec(g.batch.num_edges(), 6);
  for (auto _ : state) {
    auto r = forward(params, g.batch, xt, false, B);
    benchmark::DoNotOptimize(r.outputs.data());
  }
}

}  // namespace

BENCHMARK(BM_LinearForward<kernels::Backend::Serial>)->Args({4096, 64})->Args({16384, 128});
BENCHMARK(BM_LinearForward<kernels::Backend::Omp>)->Args({4096, 64})->Args({16384, 128});
BENCHMARK(BM_GatedAggregate<kernels::Backend::Serial>)->Args({500, 64})->Args({2000, 128});
BENCHMARK(BM_GatedAggregate<kernels::Backend::Omp>)->Args({500, 64})->Args({2000, 128});
BENCHMARK(BM_Forward<kernels::Backend::Serial>)->Args({100, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward<kernels::Backend::Omp>)->Args({100, 64})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
