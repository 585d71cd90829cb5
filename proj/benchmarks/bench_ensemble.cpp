#include <benchmark/benchmark.h>

#include "kelvinlab/config.hpp"
#include "kelvinlab/dispatch.hpp"
#include "kelvinlab/ensemble.hpp"
#include "kelvinlab/lagrangian.hpp"

using namespace kelvinlab;

namespace {

RunConfig ns_config(int n) {
  return parse_config_string("grid: {d: 2, n_per_axis: " + std::to_string(n) +
                             "}\n"
                             "model: {family: ns_poincare, nu: 0.01}\n"
                             "basis: {kind: trig, amplitude: 0.1, eta: {kind: constant_euclidean, amplitude: 1.0}}\n"
                             "time: {T: 0.05, dt: 1.0e-3}\n");
}

}  // namespace

static void BM_ConditionalKelvin(benchmark::State& st) {
  const RunConfig c = ns_config(static_cast<int>(st.range(0)));
  const Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  EnsembleOptions o;
  o.M = static_cast<std::size_t>(st.range(1));
  o.b_seed_base = c.b_seed_base();
  for (auto _ : st) benchmark::DoNotOptimize(conditional_kelvin(s.model, traj, s.loops, o));
  st.SetItemsProcessed(st.iterations() * st.range(1));
}
BENCHMARK(BM_ConditionalKelvin)->Args({32, 16})->Args({64, 16})->Unit(benchmark::kMillisecond);

static void BM_LoopAdvection(benchmark::State& st) {
  RunConfig c = ns_config(64);
  c.model.family = Family::euler_poincare;
  const Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  const MaterialLoop loop = make_circle(2, {3.14, 3.14, 0}, 1.0, static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(advect_loop(traj, s.model, s.driver, loop, FlowOptions{}));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_LoopAdvection)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
