// Serial reference versus OpenMP for the parallel kernels. Each pair runs the
// same work; arg 0 is serial, arg 1 parallel.

#include <benchmark/benchmark.h>

#include "bmix/exec.hpp"
#include "bmix/mixing.hpp"
#include "bmix/sequence.hpp"
#include "bmix/stats.hpp"
#include "bmix/sums.hpp"

using namespace bmix;

namespace {

Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Exec::serial : Exec::parallel;
}

ProcessConfig default_config() {
  ProcessConfig c;
  c.seq = LevelSequence::from_levels({2, 64, 65600});
  c.truncation = 3;
  c.seed = 1;
  return c;
}

void BM_VarianceMonteCarlo(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(variance_monte_carlo(64, 256, 20000, 1, exec_of(state)));
  }
}

void BM_CltTrials(benchmark::State& state) {
  const auto config = default_config();
  for (auto _ : state) benchmark::DoNotOptimize(clt_test(config, 1024, 2000, 0, exec_of(state)));
}

void BM_NontightFull(benchmark::State& state) {
  const auto config = default_config();
  NontightRequest req;
  req.k = 2;
  req.mode = NontightMode::full;
  req.threshold = Rational(1, 2);
  req.trials = 4000;
  for (auto _ : state) benchmark::DoNotOptimize(nontight_prob(config, req, exec_of(state)));
}

void BM_WindowBetaEnumeration(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(finite_window_beta_exact(2, 1, 2, exec_of(state)));
  }
}

void BM_MomentEnumeration(benchmark::State& state) {
  const std::vector<Rational> ps{Rational(1, 2), Rational(2)};
  for (auto _ : state) benchmark::DoNotOptimize(moment_suite(4, ps, exec_of(state)));
}

void BM_VarianceProfile(benchmark::State& state) {
  const auto config = default_config();
  std::vector<std::int64_t> Ns;
  for (std::int64_t N = 4; N <= 4096; ++N) Ns.push_back(N);
  for (auto _ : state) benchmark::DoNotOptimize(variance_profile(config, Ns, exec_of(state)));
}

void BM_IdentitySweep(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(identity_sweep(8, 384, 100, 1, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_VarianceMonteCarlo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CltTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NontightFull)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WindowBetaEnumeration)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MomentEnumeration)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VarianceProfile)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IdentitySweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
