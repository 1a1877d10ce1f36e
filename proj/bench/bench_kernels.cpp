// Serial reference vs OpenMP kernel, same inputs. Arg 0 of every benchmark
// is the row count; the second arg picks Exec (0 serial, 1 parallel).
#include <benchmark/benchmark.h>

#include <cmath>
#include <string>

#include "psa/clustering.hpp"
#include "psa/exact_attention.hpp"
#include "psa/hyper_attention.hpp"
#include "psa/parallel.hpp"
#include "psa/planted.hpp"
#include "psa/prescore.hpp"
#include "psa/rng.hpp"

namespace {

psa::Exec exec_of(const benchmark::State& state) {
  return state.range(1) == 0 ? psa::Exec::kSerial : psa::Exec::kParallel;
}

struct Inputs {
  psa::Matrix q, k, v;
};

Inputs make_inputs(std::size_t n, std::size_t d) {
  psa::Rng rng(n);
  const double scale = 1.0 / std::sqrt(std::sqrt(static_cast<double>(d)));
  return {psa::gaussian_matrix(rng, n, d, 0.0, scale), psa::gaussian_matrix(rng, n, d, 0.0, scale),
          psa::gaussian_matrix(rng, n, d, 0.0, 1.0)};
}

void BM_ExactAttention(benchmark::State& state) {
  const auto x = make_inputs(static_cast<std::size_t>(state.range(0)), 16);
  for (auto _ : state) benchmark::DoNotOptimize(psa::exact_attention(x.q, x.k, x.v, exec_of(state)));
  state.SetComplexityN(state.range(0));
}

void BM_PairwiseSqDist(benchmark::State& state) {
  const auto x = make_inputs(static_cast<std::size_t>(state.range(0)), 16);
  for (auto _ : state) benchmark::DoNotOptimize(psa::pairwise_sq_dist(x.q, x.k, exec_of(state)));
}

void BM_KMeans(benchmark::State& state) {
  psa::PlantedConfig pc;
  pc.n = static_cast<std::size_t>(state.range(0));
  pc.d = 16;
  pc.epsilon = 0.1;
  const auto inst = psa::generate_planted(pc);
  psa::PreScoreConfig cfg;
  cfg.k = 17;
  cfg.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(psa::cluster(inst.matrix, cfg, exec_of(state)));
}

void BM_HyperAttention(benchmark::State& state) {
  const auto x = make_inputs(static_cast<std::size_t>(state.range(0)), 16);
  psa::HyperConfig cfg;
  cfg.block_size = 64;
  cfg.residual_samples = 32;
  for (auto _ : state) {
    benchmark::DoNotOptimize(psa::hyper_attention(x.q, x.k, x.v, cfg, exec_of(state)));
  }
  state.SetComplexityN(state.range(0));
}

void BM_PrescoredHyper(benchmark::State& state) {
  const auto x = make_inputs(static_cast<std::size_t>(state.range(0)), 16);
  psa::PreScoredConfig cfg;
  cfg.prescore.s = 256;
  cfg.prescore.restarts = 1;
  cfg.prescore.max_iters = 25;
  cfg.hyper.block_size = 64;
  for (auto _ : state) {
    psa::Rng rng(0);
    benchmark::DoNotOptimize(psa::prescored_hyper_attention(x.q, x.k, x.v, cfg, rng, exec_of(state)));
  }
  state.SetComplexityN(state.range(0));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int exec : {0, 1}) {
    for (int n : {1024, 4096}) b->Args({n, exec});
  }
  b->ArgNames({"n", "parallel"})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ExactAttention)->Apply(sizes);
BENCHMARK(BM_PairwiseSqDist)->Apply(sizes);
BENCHMARK(BM_KMeans)->Apply(sizes);
BENCHMARK(BM_HyperAttention)->Apply(sizes);
BENCHMARK(BM_PrescoredHyper)->Apply(sizes);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::AddCustomContext("omp_threads", std::to_string(psa::max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
