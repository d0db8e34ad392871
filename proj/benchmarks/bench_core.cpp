#include <benchmark/benchmark.h>

#include "superlase/ensemble.hpp"
#include "superlase/experiments.hpp"
#include "superlase/moments.hpp"
#include "superlase/spectrum.hpp"

using namespace superlase;

namespace {

SystemRates rates(double pump) {
  SystemRates r;
  r.gamma = 0.001;
  r.pump = pump;
  return r;
}

ModelConfig model(int clusters, double pump) {
  ModelConfig c;
  c.rates = rates(pump);
  c.ensemble.clusters = clusters;
  c.ensemble.total_atoms = 10000;
  c.ensemble.sigma = 0.1;
  c.ensemble.span = 0.1;
  c.ensemble.coupling = 0.002;
  return c;
}

}  // namespace

// One right-hand-side evaluation of the clustered equations.
void BM_ClusteredRhs(benchmark::State& state) {
  const auto e = build_gaussian_clusters(static_cast<int>(state.range(0)), 10000, 0.1, 0.1, 0.002);
  const ClusteredSystem sys(e, rates(0.01));
  const auto y = sys.initial_state();
  std::vector<double> dy(sys.dimension());
  for (auto _ : state) {
    sys(y.values(), dy);
    benchmark::DoNotOptimize(dy.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ClusteredRhs)->Arg(5)->Arg(11)->Arg(31)->Arg(63)->Complexity(benchmark::oNSquared);

// One right-hand-side evaluation of the per-atom equations.
void BM_PerAtomRhs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> det(n), g(n, 0.002);
  for (std::size_t i = 0; i < n; ++i) det[i] = -0.1 + 0.2 * static_cast<double>(i) / static_cast<double>(n);
  const PerAtomSystem sys(det, g, rates(0.01));
  std::vector<double> y(sys.dimension(), 0.0), dy(sys.dimension());
  for (auto _ : state) {
    sys(y, dy);
    benchmark::DoNotOptimize(dy.data());
  }
}
BENCHMARK(BM_PerAtomRhs)->Arg(10)->Arg(50)->Arg(200);

// Steady state from the default initial state.
void BM_SteadyState(benchmark::State& state) {
  const auto cfg = model(static_cast<int>(state.range(0)), 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(solve_steady(cfg).state.photon_number());
}
BENCHMARK(BM_SteadyState)->Arg(5)->Arg(31)->Unit(benchmark::kMillisecond);

// One resolvent solve S(omega) on a converged steady state.
void BM_SpectralDensity(benchmark::State& state) {
  const auto cfg = model(static_cast<int>(state.range(0)), 0.05);
  const auto run = solve_steady(cfg);
  const auto sys = assemble_regression(run.state, run.ensemble, cfg.rates);
  double w = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(spectral_density(sys, w));
    w += 1e-6;
  }
}
BENCHMARK(BM_SpectralDensity)->Arg(5)->Arg(31);

// Full spectrum: steady state, regression assembly and adaptive grid.
void BM_Spectrum(benchmark::State& state) {
  const auto cfg = model(31, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(run_spectrum(cfg).spectrum.weight);
}
BENCHMARK(BM_Spectrum)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
