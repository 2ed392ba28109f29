// Serial reference vs blocked/OpenMP bootstrap kernels, and one full test.

#include "jkiv/hat_matrix.hpp"
#include "jkiv/inference.hpp"
#include "jkiv/kernels.hpp"
#include "jkiv/simulator.hpp"
#include "jkiv/statistics.hpp"

#include <benchmark/benchmark.h>

using namespace jkiv;

namespace {

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  Engine eng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(eng);
  return m;
}

void BM_SupScore(benchmark::State& state, bool serial) {
  const Index n = state.range(0);
  const Vector eps = gaussian(n, 1, 1).col(0);
  const Matrix Z = gaussian(n, 65, 2);
  for (auto _ : state) {
    Vector d = serial ? kernels::sup_score_draws_serial(eps, Z, 1000, 3)
                      : kernels::sup_score_draws(eps, Z, 1000, 3);
    benchmark::DoNotOptimize(d.data());
  }
}

void BM_Conditioning(benchmark::State& state, bool serial) {
  const Index n = state.range(0);
  const HatMatrix H = ridge_hat(gaussian(n, 65, 4), 0.2);
  const Matrix r = gaussian(n, 1, 5);
  const Vector norms = conditioning_row_norms(H);
  for (auto _ : state) {
    Vector d = serial ? kernels::conditioning_draws_serial(H.matrix(), r, norms, 200, 6)
                      : kernels::conditioning_draws(H.matrix(), r, norms, 200, 6);
    benchmark::DoNotOptimize(d.data());
  }
}

void BM_ThresholdingTest(benchmark::State& state) {
  SimulationSpec spec;
  spec.n = state.range(0);
  spec.regime = Regime::dz65;
  const SimulatedData sim = gen_dgp(spec, 0);
  TestConfig cfg;
  cfg.test = TestSpec::parse("thresholding");
  const TestPipeline pipeline(partial_out_controls(sim.data), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(pipeline.run(Vector::Constant(1, 1.0)).statistic);
}

}  // namespace

BENCHMARK_CAPTURE(BM_SupScore, serial, true)->Arg(200)->Arg(1000);
BENCHMARK_CAPTURE(BM_SupScore, blocked, false)->Arg(200)->Arg(1000);
BENCHMARK_CAPTURE(BM_Conditioning, serial, true)->Arg(200)->Arg(500);
BENCHMARK_CAPTURE(BM_Conditioning, blocked, false)->Arg(200)->Arg(500);
BENCHMARK(BM_ThresholdingTest)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
