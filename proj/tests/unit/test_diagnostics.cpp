#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "kelvinlab/config.hpp"
#include "kelvinlab/diagnostics.hpp"
#include "kelvinlab/dispatch.hpp"
#include "kelvinlab/error.hpp"

using namespace kelvinlab;

namespace {

constexpr double kPi = std::numbers::pi;

SpectralField shear(const TorusGrid& g) {
  return SpectralField::vector(g, [](const Point& x) { return Point{std::sin(x[1]), 0, 0}; });
}

kelvinlab::Setup shear_setup() {
  return build_setup(parse_config_string("grid: {d: 2, n_per_axis: 32}\n"
                                         "model: {family: euler_poincare}\n"
                                         "basis: {kind: none}\n"
                                         "initial: {kind: shear, amplitude: 1.0}\n"
                                         "time: {T: 0.2, dt: 1.0e-2}\n"
                                         "seeds: {master: 1}\n"));
}

}  // namespace

// Circle of radius r about (pi, pi) in the shear (sin y, 0): circulation 2 pi r J1(r).
TEST(Circulation, ShearAroundCircle) {
  const TorusGrid g(2, 32);
  for (double r : {0.5, 1.0, 2.0}) {
    const MaterialLoop c = make_circle(2, {kPi, kPi, 0}, r, 256);
    const double want = 2 * kPi * r * std::cyl_bessel_j(1.0, r);
    EXPECT_NEAR(circulation(shear(g), c), want, 1e-12);
    EXPECT_NEAR(vorticity_flux(shear(g), c), want, 1e-9);
  }
}

TEST(Circulation, ConstantFlowAlongWindingLine) {
  const TorusGrid g(2, 16);
  const SpectralField u = SpectralField::vector(g, [](const Point&) { return Point{1.5, -0.5, 0}; });
  EXPECT_NEAR(circulation(u, make_axis_line(2, 0.4, 32)), 3 * kPi, 1e-12);
  EXPECT_NEAR(circulation(u, make_circle(2, {1, 2, 0}, 0.8, 32)), 0.0, 1e-12);
  EXPECT_THROW(vorticity_flux(u, make_axis_line(2, 0.4, 32)), InvalidArgument);
}

TEST(Circulation, Stokes3D) {
  const TorusGrid g(3, 16);
  const SpectralField u = random_field(g, 3, 21, 3, true);
  const MaterialLoop c = make_circle(3, {3.0, 3.2, 2.5}, 0.9, 128);
  EXPECT_NEAR(vorticity_flux(u, c), circulation(u, c), 1e-8 * (1 + std::abs(circulation(u, c))));
}

TEST(Circulation, UnderResolvedLoopThrows) {
  const TorusGrid g(2, 16);
  std::vector<Point> pts;
  for (int j = 0; j < 16; ++j) {
    const double s = j < 15 ? 0.05 * j : 4.0;
    pts.push_back({1 + s, 1 + 0.3 * std::sin(s), 0});
  }
  EXPECT_THROW(circulation(shear(g), MaterialLoop(2, pts)), ResolutionError);
}

// ABC flow with unit coefficients is a Beltrami field: curl u = u.
TEST(Helicity, BeltramiField) {
  const TorusGrid g(3, 16);
  const SpectralField u = SpectralField::vector(g, [](const Point& x) {
    return Point{std::sin(x[2]) + std::cos(x[1]), std::sin(x[0]) + std::cos(x[2]), std::sin(x[1]) + std::cos(x[0])};
  });
  EXPECT_LT(max_abs(curl(u) - u), 1e-12);
  EXPECT_NEAR(helicity(u), inner_product(u, u), 1e-9);
  EXPECT_NEAR(helicity(u), 3 * 8 * kPi * kPi * kPi, 1e-9);
  EXPECT_NEAR(magnetic_helicity(u, curl(u)), helicity(u), 1e-9);
  EXPECT_THROW(helicity(shear(TorusGrid(2, 16))), InvalidArgument);
}

TEST(EnergyLedger, SteadyShearCloses) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  const EnergyLedger e = energy_ledger(s.model, traj);
  // 1/2 int sin^2 y over the torus
  EXPECT_NEAR(e.energy.front(), kPi * kPi, 1e-12);
  EXPECT_LT(e.max_closure(), 1e-12);
}

TEST(Cauchy, SteadyShearConservesVorticityOnParticles) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  const FlowEnsemble f = advect(traj, s.model, s.driver, label_grid_points(2, 8), FlowOptions{});
  EXPECT_LT(cauchy_residual(traj, f).max_abs(), 1e-12);
}

TEST(Weber, ReconstructionOfShear) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  EXPECT_LT(max_abs(weber_reconstruction(s.u0, SpectralField(s.grid, 2)) - s.u0), 1e-14);
  const LabelTrajectory lt = solve_back_to_labels(traj, s.model, s.driver);
  const WeberReport w = weber_label_grid(traj, lt);
  EXPECT_EQ(w.mode, WeberMode::label_grid);
  for (double r : w.residual) EXPECT_LT(r, 1e-10);
}

TEST(Weber, PullbackOfShear) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  const FlowEnsemble f = evolve_deformation(traj, s.model, s.driver, label_grid_points(2, 16), FlowOptions{});
  const WeberReport w = weber_pullback(traj, f, 16);
  for (double r : w.residual) EXPECT_LT(r, 1e-8);
}

TEST(Kelvin, SteadyShearCirculationIsConstant) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  const MaterialLoop c = make_circle(2, {kPi, kPi, 0}, 1.0, 128);
  const LoopFlow lf = advect_loop(traj, s.model, s.driver, c, FlowOptions{});
  const TimeSeries k = kelvin_residual(traj, lf.initial, lf.flow, Flavor::strat);
  EXPECT_LT(k.max_abs(), 1e-10);
  const CirculationDecomposition d =
      circulation_transport_decomposition(s.model, traj, lf.initial, lf.flow, Flavor::strat);
  EXPECT_LT(d.max_closure(), 1e-10);
}

TEST(SeriesCsv, HeaderAndRows) {
  const auto path = (std::filesystem::temp_directory_path() / "kl_series.csv").string();
  write_series_csv(path, {0.0, 0.5}, {"a", "b"}, {{1.0, 2.0}, {3.0, 4.0}});
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,a,b");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 2);
  EXPECT_THROW(write_series_csv(path, {0.0}, {"a"}, {{1.0, 2.0}}), InvalidArgument);
  std::filesystem::remove(path);
}
