#include <benchmark/benchmark.h>

#include <cmath>

#include "uot/kernels.hpp"
#include "uot/measures.hpp"
#include "uot/semidual.hpp"
#include "uot/solvers.hpp"

using namespace uot;

namespace {

UotParams params(SourceDivergence d, double eps, double rho) {
  UotParams p;
  p.source = d;
  p.epsilon = eps;
  p.rho1 = p.rho2 = rho;
  return p;
}

SemiDual cube(std::size_t n, const UotParams& p) {
  const RowMatrix x = uniform_cube_points(n, 10, 1);
  const RowMatrix y = uniform_cube_points(n, 10, 2);
  return SemiDual(DiscreteMeasure::uniform(x), build_cost_matrix(x, y), DiscreteMeasure::uniform(y), p);
}

void BM_Evaluate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = state.range(1) ? SourceDivergence::Chi2 : SourceDivergence::KL;
  const SemiDual J = cube(n, params(d, 0.01, 1.0));
  const Vector g = Vector::Constant(static_cast<Eigen::Index>(n), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(J.evaluate(g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Evaluate)->ArgsProduct({{100, 400, 1600}, {0, 1}});

void BM_SoftmaxRow(benchmark::State& state) {
  const auto n = state.range(0);
  const UotParams p = params(SourceDivergence::KL, 0.01, 1.0);
  const Vector c = Vector::LinSpaced(n, 0.0, 1.0);
  const Vector g = Vector::LinSpaced(n, -0.5, 0.5);
  const Vector lb = Vector::Constant(n, -std::log(static_cast<double>(n)));
  Vector w(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_row(c, g, p, lb, w));
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SoftmaxRow)->Arg(64)->Arg(1024)->Arg(16384);

void BM_LambertFromLog(benchmark::State& state) {
  double x = static_cast<double>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(lambert_w_from_log(x));
    x += 1e-9;
  }
}
BENCHMARK(BM_LambertFromLog)->Arg(-20)->Arg(0)->Arg(50)->Arg(1000000);

void BM_StochasticGradient(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t n = 2000;
  const UotParams p = params(SourceDivergence::KL, 0.01, 1.0);
  const RowMatrix y = uniform_cube_points(n, 10, 2);
  const DiscreteMeasure target = DiscreteMeasure::uniform(y);
  const RowMatrix x = uniform_cube_points(10000, 10, 1);
  const Vector a = Vector::Constant(x.rows(), 1.0 / static_cast<double>(x.rows()));
  SampleSource src = SampleSource::finite(x, a, 3);
  const CostFn cost = metric_cost(y);
  const Vector g = Vector::Zero(static_cast<Eigen::Index>(n));
  for (auto _ : state) {
    state.PauseTiming();
    const Batch b = draw_batch(src, m);
    state.ResumeTiming();
    benchmark::DoNotOptimize(stochastic_gradient(g, b, cost, target, p));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * n));
}
BENCHMARK(BM_StochasticGradient)->Arg(1)->Arg(8)->Arg(32);

void BM_AnagSolve(benchmark::State& state) {
  const SemiDual J = cube(static_cast<std::size_t>(state.range(0)), params(SourceDivergence::KL, 0.05, 1.0));
  FullBatchConfig cfg;
  cfg.tol = 1e-8;
  cfg.record_clock = false;
  cfg.trace_every = 1000000;
  std::size_t iters = 0;
  for (auto _ : state) {
    const SolveResult r = anag_solve(J, cfg);
    iters = r.iterations;
    benchmark::DoNotOptimize(r.objective);
  }
  state.counters["iterations"] = static_cast<double>(iters);
}
BENCHMARK(BM_AnagSolve)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
