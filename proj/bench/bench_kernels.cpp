#include <random>

#include <benchmark/benchmark.h>

#include "gmmcache/cache.hpp"
#include "gmmcache/gmm.hpp"
#include "gmmcache/gmm_kernels.hpp"

using namespace gmmcache;

namespace {

std::vector<Vec2> points(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 1.5);
  std::vector<Vec2> out(n);
  for (auto& p : out) p = {d(rng), d(rng)};
  return out;
}

GmmModel model(int k) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> w(static_cast<std::size_t>(k), 1.0 / k);
  std::vector<Gaussian2> g;
  for (int i = 0; i < k; ++i) g.push_back({{u(rng), u(rng)}, {0.2, 0.05, 0.3}});
  return GmmModel(w, g);
}

template <bool Parallel>
void BM_EStep(benchmark::State& state) {
  const auto z = points(static_cast<std::size_t>(state.range(0)));
  const auto m = model(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    auto s = Parallel ? kernels::estep_parallel(m.terms(), z) : kernels::estep_serial(m.terms(), z);
    benchmark::DoNotOptimize(s.log_likelihood_sum);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_ScoreBatch(benchmark::State& state) {
  const auto z = points(static_cast<std::size_t>(state.range(0)));
  const auto m = model(static_cast<int>(state.range(1)));
  std::vector<double> out(z.size());
  for (auto _ : state) {
    if (Parallel) {
      kernels::log_score_batch_parallel(m, z, out);
    } else {
      kernels::log_score_batch_serial(m, z, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateLru(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> page(0, 100000);
  std::vector<Sample> t(static_cast<std::size_t>(state.range(0)));
  for (auto& s : t) s = {page(rng), 0, AccessKind::kRead};
  for (auto _ : state) {
    auto r = simulate(t, CacheConfig{}, Policy{});
    benchmark::DoNotOptimize(r.hits);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_EStep<false>)->Name("estep/serial")->Args({100000, 64})->Args({100000, 256});
BENCHMARK(BM_EStep<true>)->Name("estep/parallel")->Args({100000, 64})->Args({100000, 256});
BENCHMARK(BM_ScoreBatch<false>)->Name("score/serial")->Args({100000, 64})->Args({100000, 256});
BENCHMARK(BM_ScoreBatch<true>)->Name("score/parallel")->Args({100000, 64})->Args({100000, 256});
BENCHMARK(BM_SimulateLru)->Name("simulate/lru")->Arg(1000000);

BENCHMARK_MAIN();
