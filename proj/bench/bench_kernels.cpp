// Serial reference vs OpenMP kernels, plus one Lewis-weight solve that
// spends most of its time in them.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "olar/kernels.hpp"
#include "olar/lewis.hpp"

using namespace olar;

namespace {

Matrix random_rows(Index n, Index d) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  Matrix a(n, d);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = nd(gen);
  return a;
}

std::vector<double> random_weights(Index n) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (double& x : w) x = u(gen);
  return w;
}

template <bool Parallel>
void BM_WeightedGram(benchmark::State& state) {
  const Matrix a = random_rows(state.range(0), state.range(1));
  const std::vector<double> w = random_weights(a.rows());
  for (auto _ : state) {
    Square g = Parallel ? kernels::weighted_gram(a, w) : kernels::serial::weighted_gram(a, w);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * a.rows());
}

template <bool Parallel>
void BM_QuadraticForms(benchmark::State& state) {
  const Matrix a = random_rows(state.range(0), state.range(1));
  const Square m = kernels::serial::weighted_gram(a).inverse();
  std::vector<double> out(static_cast<std::size_t>(a.rows()));
  for (auto _ : state) {
    if (Parallel)
      kernels::row_quadratic_forms(a, m, out);
    else
      kernels::serial::row_quadratic_forms(a, m, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * a.rows());
}

void BM_LewisWeights(benchmark::State& state) {
  const Matrix a = random_rows(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(lewis_weights(a, 1.5).weights.data());
}

void shapes(benchmark::internal::Benchmark* b) {
  for (long n : {2000, 20000, 200000}) b->Args({n, 20});
  b->Args({13910, 128});
}

}  // namespace

BENCHMARK(BM_WeightedGram<false>)->Name("weighted_gram/serial")->Apply(shapes);
BENCHMARK(BM_WeightedGram<true>)->Name("weighted_gram/omp")->Apply(shapes);
BENCHMARK(BM_QuadraticForms<false>)->Name("row_quadratic_forms/serial")->Apply(shapes);
BENCHMARK(BM_QuadraticForms<true>)->Name("row_quadratic_forms/omp")->Apply(shapes);
BENCHMARK(BM_LewisWeights)->Args({20000, 20});

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::AddCustomContext("omp_threads", std::to_string(kernels::max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
}
