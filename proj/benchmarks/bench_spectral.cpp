#include <benchmark/benchmark.h>

#include <vector>

#include "kelvinlab/config.hpp"
#include "kelvinlab/dispatch.hpp"
#include "kelvinlab/grid.hpp"
#include "kelvinlab/integrator.hpp"
#include "kelvinlab/lie.hpp"

using namespace kelvinlab;

static void BM_LerayProject(benchmark::State& st) {
  const TorusGrid g(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  const SpectralField v = random_field(g, g.dim(), 1, g.kmax());
  for (auto _ : st) benchmark::DoNotOptimize(leray_project(v));
}
BENCHMARK(BM_LerayProject)->Args({2, 64})->Args({2, 128})->Args({3, 16})->Args({3, 32});

static void BM_LieTranspose(benchmark::State& st) {
  const TorusGrid g(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  const SpectralField xi = random_field(g, g.dim(), 2, 4, true);
  const SpectralField u = random_field(g, g.dim(), 3, 4, true);
  for (auto _ : st) benchmark::DoNotOptimize(lie_transpose(xi, u));
}
BENCHMARK(BM_LieTranspose)->Args({2, 64})->Args({3, 16});

static void BM_PointSample(benchmark::State& st) {
  const TorusGrid g(2, 64);
  const PointSampler ps(random_field(g, 2, 4, static_cast<int>(st.range(0)), true));
  double v[2], gr[4];
  Point x{1.0, 2.0, 0.0};
  for (auto _ : st) {
    ps.sample(x, v, gr);
    x[0] += 1e-3;
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_PointSample)->Arg(3)->Arg(21);

static void BM_HeunStep(benchmark::State& st) {
  RunConfig c = parse_config_string("grid: {d: 2, n_per_axis: 64}\nmodel: {family: euler_poincare}\n"
                                    "time: {T: 0.1, dt: 1.0e-3}\n");
  c.model.family = static_cast<Family>(st.range(0));
  if (c.model.family == Family::ns_poincare || c.model.family == Family::energy_ns) {
    c.model.nu = 0.01;
    c.basis.eta.kind = BasisKind::constant_euclidean;
    c.basis.eta.amplitude = 1.0;
  }
  const Setup s = build_setup(c);
  const std::vector<double> dW(s.model.channels(), 0.03);
  for (auto _ : st) benchmark::DoNotOptimize(advance(s.model, s.u0, 1e-3, dW, Scheme::strat_heun));
  st.SetLabel(to_string(c.model.family));
}
BENCHMARK(BM_HeunStep)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
