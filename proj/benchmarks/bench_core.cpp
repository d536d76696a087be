#include <benchmark/benchmark.h>

#include "ksg/diagnostics.hpp"
#include "ksg/heat_kernel.hpp"
#include "ksg/laplacian.hpp"
#include "ksg/solver.hpp"
#include "support.hpp"

using namespace ksg;

namespace {

std::shared_ptr<const MetricGraph> graph_for(int which) {
  return which == 0 ? testing::star3() : testing::cycle_with_pendant();
}

void BM_PlanBuild(benchmark::State& state) {
  const auto g = graph_for(static_cast<int>(state.range(0)));
  const double horizon = static_cast<double>(state.range(1)) / 100.0;
  for (auto _ : state) {
    HeatKernelPlan plan(g, horizon, 1e-12);
    benchmark::DoNotOptimize(plan.record_count());
  }
}
BENCHMARK(BM_PlanBuild)->Args({0, 10})->Args({0, 100})->Args({1, 10})->Args({1, 100})->Unit(benchmark::kMillisecond);

void BM_KernelMatrix(benchmark::State& state) {
  const auto g = testing::star3();
  HeatKernelPlan plan(g, 0.1, 1e-12);
  const auto mesh = std::make_shared<const Mesh>(g, static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(plan.build_matrix(*mesh, 0.05, KernelKind::Heat).data());
  state.counters["nodes"] = static_cast<double>(mesh->size());
}
BENCHMARK(BM_KernelMatrix)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ApplyCached(benchmark::State& state) {
  const auto g = testing::star3();
  HeatKernelPlan plan(g, 0.1, 1e-12);
  const auto mesh = std::make_shared<const Mesh>(g, static_cast<double>(state.range(0)));
  const auto u = testing::bump(mesh, 0, 0.5, 0.1);
  apply_heat(plan, 0.05, 0.0, u);
  apply_heat(plan, 0.05, 0.0, u);  // second call fills the cache
  for (auto _ : state) benchmark::DoNotOptimize(apply_heat(plan, 0.05, 0.0, u).values().data());
}
BENCHMARK(BM_ApplyCached)->Arg(100)->Arg(200)->Unit(benchmark::kMicrosecond);

void BM_Eigendecompose(benchmark::State& state) {
  const auto lap = assemble(testing::star3(), static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(eigendecompose(lap, 10).eigenvalues.data());
}
BENCHMARK(BM_Eigendecompose)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

// Minimal model on the 3-star over t in [0, 0.2].
void BM_SolveMild(benchmark::State& state) {
  const auto g = testing::star3();
  SolverConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 0.2;
  cfg.nodes_per_unit_length = static_cast<double>(state.range(0));
  HeatKernelPlan plan(g, cfg.max_window_steps * cfg.dt, 1e-12);
  const auto mesh = std::make_shared<const Mesh>(g, cfg.nodes_per_unit_length);
  const auto u0 = GridFunction::constant(mesh, 1.0) + testing::bump(mesh, 0, 0.5, 0.1);
  const auto v0 = GridFunction::constant(mesh, 1.0);
  const auto nl = make_minimal(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_mild(plan, nl, u0, v0, cfg).times.size());
}
BENCHMARK(BM_SolveMild)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_SolveReference(benchmark::State& state) {
  const auto g = testing::star3();
  SolverConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 0.2;
  cfg.nodes_per_unit_length = static_cast<double>(state.range(0));
  const DiscreteLaplacian lap(std::make_shared<const Mesh>(g, cfg.nodes_per_unit_length));
  const auto mesh = lap.mesh_ptr();
  const auto u0 = GridFunction::constant(mesh, 1.0) + testing::bump(mesh, 0, 0.5, 0.1);
  const auto v0 = GridFunction::constant(mesh, 1.0);
  const auto nl = make_minimal(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_reference(lap, nl, u0, v0, cfg).times.size());
}
BENCHMARK(BM_SolveReference)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
