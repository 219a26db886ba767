// Serial reference loops against their OpenMP counterparts. Both produce
// identical output; only the wall time differs.
//
//   bench_parallel --benchmark_filter=Evaluate

#include "gencaps/experiment.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace gencaps;

namespace {

const std::vector<Scene>& dataset(double sigma, std::size_t draws) {
  static std::map<std::pair<double, std::size_t>, std::vector<Scene>> cache;
  auto& d = cache[{sigma, draws}];
  if (d.empty()) {
    GenConfig cfg;
    cfg.sigma = sigma;
    cfg.draws = draws;
    d = generate_dataset_serial(cfg, 7);
  }
  return d;
}

template <bool Parallel>
void BM_Generate(benchmark::State& state) {
  GenConfig cfg;
  cfg.sigma = 0.1;
  cfg.draws = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto d = Parallel ? generate_dataset(cfg, 7) : generate_dataset_serial(cfg, 7);
    benchmark::DoNotOptimize(d.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Evaluate(benchmark::State& state) {
  const auto method = static_cast<Method>(state.range(0));
  const auto& data = dataset(0.1, static_cast<std::size_t>(state.range(1)));
  const auto lib = TemplateLibrary::constellation();
  MethodSpec spec;
  spec.method = method;
  spec.restarts = 1;
  state.SetLabel(std::string(to_string(method)));
  for (auto _ : state) {
    auto out = Parallel ? evaluate_dataset(data, lib, spec, 7)
                        : evaluate_dataset_serial(data, lib, spec, 7);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}

}  // namespace

BENCHMARK(BM_Generate<false>)
    ->Name("Generate/serial")
    ->Arg(512)
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(BM_Generate<true>)
    ->Name("Generate/openmp")
    ->Arg(512)
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

// Args: method (0 gcm-ds, 1 gcm-gmm, 2 ransac), draws.
BENCHMARK(BM_Evaluate<false>)
    ->Name("Evaluate/serial")
    ->Args({0, 64})
    ->Args({1, 64})
    ->Args({2, 512})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(BM_Evaluate<true>)
    ->Name("Evaluate/openmp")
    ->Args({0, 64})
    ->Args({1, 64})
    ->Args({2, 512})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
