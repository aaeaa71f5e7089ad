// Serial reference kernels against their OpenMP counterparts.
//   ./dbrrt_kernels --benchmark_counters_tabular=true

#include "dbrrt/bench.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace dbrrt;

namespace {

const char *kProblem = R"(name: kernels
system: unicycle1
environment:
  dim: 2
  min: [0, 0]
  max: [8, 8]
  obstacles:
    - {name: pillar, type: sphere, center: [3.0, 3.0], radius: 0.7}
    - {name: crate, type: box, center: [5.5, 4.0], half_extents: [0.5, 0.8]}
start: [1.0, 1.0, 0.0]
goal: [7.0, 7.0, 0.0]
)";

const ProblemInstance &problem() {
  static const ProblemInstance p = parse_problem(kProblem, "kernels");
  return p;
}

std::shared_ptr<const PrimitiveLibrary> library() {
  static const auto lib = [] {
    const auto &p = problem();
    return std::make_shared<const PrimitiveLibrary>(
        p.system_ptr(), generate_primitives_omp(p.system_ptr(), p.config.generation, 1000, 1, 20000));
  }();
  return lib;
}

void BM_GenerateSerial(benchmark::State &state) {
  const auto &p = problem();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(generate_primitives_serial(p.system_ptr(), p.config.generation, n, 3, 100 * n));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void BM_GenerateOmp(benchmark::State &state) {
  const auto &p = problem();
  const auto n = static_cast<std::size_t>(state.range(0));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(generate_primitives_omp(p.system_ptr(), p.config.generation, n, 3, 100 * n));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void BM_NearestIndex(benchmark::State &state) {
  const auto lib = library();
  const auto &spec = lib->system().spec();
  std::mt19937_64 rng(4);
  const State lo = problem().sample_lower, hi = problem().sample_upper;
  for (auto _ : state)
    benchmark::DoNotOptimize(lib->nearest_r_indices(sample_uniform_state(spec, lo, hi, rng), 0.3));
}

void BM_NearestBrute(benchmark::State &state) {
  const auto lib = library();
  const auto &spec = lib->system().spec();
  std::mt19937_64 rng(4);
  const State lo = problem().sample_lower, hi = problem().sample_upper;
  for (auto _ : state)
    benchmark::DoNotOptimize(lib->nearest_r_indices_brute(sample_uniform_state(spec, lo, hi, rng), 0.3));
}

BenchConfig runner_config() {
  BenchConfig bc;
  bc.seeds = seed_range(0, 8);
  bc.timeout = 60;
  return bc;
}

void BM_RunnerSerial(benchmark::State &state) {
  const std::vector<ProblemInstance> suite{problem()};
  const LibraryProvider lib = [](const ProblemInstance &) { return library(); };
  for (auto _ : state)
    benchmark::DoNotOptimize(run_benchmark_serial(suite, lib, runner_config()));
}

void BM_RunnerOmp(benchmark::State &state) {
  const std::vector<ProblemInstance> suite{problem()};
  const LibraryProvider lib = [](const ProblemInstance &) { return library(); };
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(run_benchmark_omp(suite, lib, runner_config()));
}

} // namespace

BENCHMARK(BM_GenerateSerial)->Arg(200)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GenerateOmp)->Args({200, 1})->Args({200, 2})->Args({200, 4})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_NearestIndex);
BENCHMARK(BM_NearestBrute);
BENCHMARK(BM_RunnerSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RunnerOmp)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
