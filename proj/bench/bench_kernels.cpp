// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to taste.

#include <benchmark/benchmark.h>

#include <random>

#include "fluctlab/dynamics.hpp"
#include "fluctlab/experiments.hpp"
#include "fluctlab/kernels.hpp"

using namespace fluctlab;

namespace {

struct Fixture {
  TorusGrid g;
  std::vector<double> f, lap;
  std::vector<std::vector<double>> w, chi;
  double* wp[3]{};
  const double* wc[3]{};
  const double* cc[3]{};

  Fixture(int d, int M) : g(d, M), f(g.size()), lap(g.size()), w(d, std::vector<double>(g.size())), chi(d, std::vector<double>(g.size())) {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (auto& v : f) v = u(rng);
    for (int j = 0; j < d; ++j) {
      for (auto& v : chi[j]) v = u(rng);
      wp[j] = w[j].data();
      wc[j] = w[j].data();
      cc[j] = chi[j].data();
    }
  }
};

template <bool Omp>
void BM_gradient(benchmark::State& st) {
  Fixture fx(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) {
    if constexpr (Omp)
      kernels::omp::gradient(fx.g, fx.f.data(), fx.wp);
    else
      kernels::serial::gradient(fx.g, fx.f.data(), fx.wp);
    benchmark::DoNotOptimize(fx.w[0].data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(fx.g.size()));
}

template <bool Omp>
void BM_divergence(benchmark::State& st) {
  Fixture fx(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) {
    if constexpr (Omp)
      kernels::omp::divergence(fx.g, fx.wc, fx.lap.data());
    else
      kernels::serial::divergence(fx.g, fx.wc, fx.lap.data());
    benchmark::DoNotOptimize(fx.lap.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(fx.g.size()));
}

template <bool Omp>
void BM_weighted_laplacian(benchmark::State& st) {
  Fixture fx(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) {
    if constexpr (Omp)
      kernels::omp::weighted_laplacian(fx.g, fx.cc, fx.f.data(), fx.lap.data());
    else
      kernels::serial::weighted_laplacian(fx.g, fx.cc, fx.f.data(), fx.lap.data());
    benchmark::DoNotOptimize(fx.lap.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(fx.g.size()));
}

// Independent SSEP replicas, the workload of the hydrodynamic-limit runs.
template <bool Omp>
void BM_replicas(benchmark::State& st) {
  const TorusGrid lattice(1, 200);
  const auto n = static_cast<std::size_t>(st.range(0));
  auto run = [&](std::size_t r) {
    const auto init = random_state(lattice, StateKind::exclusion, 0.5, derive_seed(1, 2 * r));
    return simulate_exclusion(init, 0.01, DriftField::zero(1), derive_seed(1, 2 * r + 1)).final_state.total();
  };
  for (auto _ : st) {
    auto out = Omp ? kernels::map_replicas_omp(n, run) : kernels::map_replicas_serial(n, run);
    benchmark::DoNotOptimize(out.data());
  }
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({1, 1 << 16})->Args({2, 512})->Args({3, 64});
}

}  // namespace

BENCHMARK(BM_gradient<false>)->Name("gradient/serial")->Apply(shapes);
BENCHMARK(BM_gradient<true>)->Name("gradient/omp")->Apply(shapes);
BENCHMARK(BM_divergence<false>)->Name("divergence/serial")->Apply(shapes);
BENCHMARK(BM_divergence<true>)->Name("divergence/omp")->Apply(shapes);
BENCHMARK(BM_weighted_laplacian<false>)->Name("weighted_laplacian/serial")->Apply(shapes);
BENCHMARK(BM_weighted_laplacian<true>)->Name("weighted_laplacian/omp")->Apply(shapes);
BENCHMARK(BM_replicas<false>)->Name("replicas/serial")->Arg(16);
BENCHMARK(BM_replicas<true>)->Name("replicas/omp")->Arg(16);

BENCHMARK_MAIN();
