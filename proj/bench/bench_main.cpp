// Serial reference versus OpenMP and FFT paths.
#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "perfectsim/cluster.hpp"
#include "perfectsim/hawkes.hpp"
#include "perfectsim/validation.hpp"

using namespace perfectsim;

namespace {

std::vector<double> smooth_cdf(std::size_t n) {
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = 1.0 - std::exp(-static_cast<double>(i) / (0.1 * n));
  return f;
}

void phi(benchmark::State& st, ConvMethod m) {
  const auto nodes = static_cast<std::size_t>(st.range(0));
  const FertilityKernel k({{1.0, PolynomialShape{0.02, 50.0, 1}}});
  const double step = 100.0 / static_cast<double>(nodes);
  PhiOperator op(k, step, nodes, m);
  const auto f = smooth_cdf(nodes);
  for (auto _ : st) benchmark::DoNotOptimize(op.apply(f, Rounding::down));
  st.SetComplexityN(st.range(0));
}

void BM_PhiSerial(benchmark::State& st) { phi(st, ConvMethod::serial); }
void BM_PhiParallel(benchmark::State& st) { phi(st, ConvMethod::parallel); }
void BM_PhiFft(benchmark::State& st) { phi(st, ConvMethod::fft); }

void replicates(benchmark::State& st, bool parallel) {
  const CoxClusterKernel k(1, 2.0, UniformBoxDisplacement{{0}, {1}});
  const auto germ = IntensityMeasure::lebesgue(1.0, 1);
  const Window w = Window::interval(0, 10);
  const auto n = static_cast<std::size_t>(st.range(0));
  for (auto _ : st) {
    benchmark::DoNotOptimize(run_replicates<PointPattern>(
        n, 1, [&](RngStream& r, std::size_t) { return brix_kendall_sample(germ, k, w, r); }, parallel));
  }
}

void BM_ReplicatesSerial(benchmark::State& st) { replicates(st, false); }
void BM_ReplicatesParallel(benchmark::State& st) { replicates(st, true); }

}  // namespace

BENCHMARK(BM_PhiSerial)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PhiParallel)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PhiFft)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ReplicatesSerial)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicatesParallel)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
