#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kelvinlab/config.hpp"
#include "kelvinlab/dispatch.hpp"
#include "kelvinlab/error.hpp"
#include "kelvinlab/lagrangian.hpp"

using namespace kelvinlab;

namespace {

constexpr double kPi = std::numbers::pi;

kelvinlab::Setup shear_setup(double T = 0.3) {
  return build_setup(parse_config_string("grid: {d: 2, n_per_axis: 32}\n"
                                         "model: {family: euler_poincare}\n"
                                         "basis: {kind: none}\n"
                                         "initial: {kind: shear, amplitude: 1.0}\n"
                                         "time: {T: " + std::to_string(T) + ", dt: 1.0e-2}\n"
                                         "seeds: {master: 1}\n"));
}

}  // namespace

TEST(MaterialLoop, CircleGeometry) {
  const MaterialLoop c = make_circle(2, {kPi, kPi, 0}, 1.0, 128);
  EXPECT_EQ(c.size(), 128u);
  EXPECT_TRUE(c.contractible());
  EXPECT_NEAR(c.signed_area(), kPi, 1e-12);
  EXPECT_NEAR(c.reversed().signed_area(), -kPi, 1e-12);
  EXPECT_TRUE(c.spacing_ok());
  const auto t = c.tangents();
  // Gamma(s) = c + (cos 2 pi s, sin 2 pi s): |Gamma'| = 2 pi
  for (const auto& v : t) EXPECT_NEAR(std::hypot(v[0], v[1]), 2 * kPi, 1e-11);
  const MaterialLoop r = c.refined();
  EXPECT_EQ(r.size(), 256u);
  EXPECT_NEAR(r.signed_area(), kPi, 1e-12);
}

TEST(MaterialLoop, AxisLineWinds) {
  const MaterialLoop l = make_axis_line(2, 1.0, 64);
  EXPECT_FALSE(l.contractible());
  EXPECT_EQ(l.winding()[0], 1);
  for (const auto& v : l.tangents()) {
    EXPECT_NEAR(v[0], 2 * kPi, 1e-11);
    EXPECT_NEAR(v[1], 0.0, 1e-12);
  }
}

TEST(MaterialLoop, RejectsDegenerateInput) {
  EXPECT_THROW(MaterialLoop(2, {{0, 0, 0}, {1, 0, 0}}), ValidationError);
}

TEST(LabelGrid, Layout) {
  const auto p = label_grid_points(2, 8);
  ASSERT_EQ(p.size(), 64u);
  EXPECT_DOUBLE_EQ(p[0][0], 0.0);
  EXPECT_NEAR(p[1][0], 2 * kPi / 8, 1e-15);
  EXPECT_NEAR(p[8][1], 2 * kPi / 8, 1e-15);
  EXPECT_EQ(label_grid_points(3, 4).size(), 64u);
}

TEST(Mat3, Determinant) {
  Mat3 m = identity_mat();
  EXPECT_DOUBLE_EQ(det(m, 3), 1.0);
  m[1] = 5.0;
  m[4] = 2.0;
  EXPECT_DOUBLE_EQ(det(m, 2), 2.0);
  EXPECT_DOUBLE_EQ(det(m, 3), 2.0);
}

// Under the steady shear (sin y, 0): X_t = (x + t sin y, y), grad X = [[1, t cos y], [0, 1]].
TEST(Flow, ShearParticlesAndDeformation) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  const std::vector<Point> x0{{0.3, 0.7, 0}, {2.0, 4.0, 0}, {5.5, 1.2, 0}};
  FlowOptions fo;
  const FlowEnsemble f = evolve_deformation(traj, s.model, s.driver, x0, fo);
  const double T = 0.3;
  ASSERT_EQ(f.positions.size(), traj.snapshots.size());
  for (std::size_t p = 0; p < x0.size(); ++p) {
    const Point& X = f.positions.back()[p];
    EXPECT_NEAR(X[0], x0[p][0] + T * std::sin(x0[p][1]), 1e-12);
    EXPECT_NEAR(X[1], x0[p][1], 1e-13);
    const Mat3& F = f.defgrad.back()[p];
    EXPECT_NEAR(F[0], 1.0, 1e-12);
    EXPECT_NEAR(F[1], T * std::cos(x0[p][1]), 1e-12);
    EXPECT_NEAR(F[3], 0.0, 1e-12);
    EXPECT_NEAR(F[4], 1.0, 1e-12);
    EXPECT_NEAR(det(F, 2), 1.0, 1e-12);
  }
}

// Back-to-labels map of the shear: a_t = (-t sin y, 0).
TEST(Flow, ShearLabels) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  const LabelTrajectory lt = solve_back_to_labels(traj, s.model, s.driver);
  const SpectralField want = SpectralField::vector(s.grid, [](const Point& x) { return Point{-0.3 * std::sin(x[1]), 0, 0}; });
  EXPECT_LT(max_abs(lt.final() - want), 1e-12);
}

TEST(Flow, LoopAdvectionKeepsResolution) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  const MaterialLoop c = make_circle(2, {kPi, kPi, 0}, 1.0, 64);
  const LoopFlow lf = advect_loop(traj, s.model, s.driver, c, FlowOptions{});
  EXPECT_EQ(lf.refinements, 0);
  const MaterialLoop moved = lf.initial.moved(lf.flow.positions.back());
  // volume preserving: the enclosed area is conserved
  EXPECT_NEAR(moved.signed_area(), kPi, 1e-6);
}

TEST(Flow, RequiresDefgradForDeformationOnlyWhenAsked) {
  const kelvinlab::Setup s = shear_setup();
  const FieldTrajectory traj = run_setup(s);
  const FlowEnsemble f = advect(traj, s.model, s.driver, {{1, 1, 0}}, FlowOptions{});
  EXPECT_TRUE(f.defgrad.empty());
}

// Compressible deterministic drift b = grad(0.5 cos x): det grad X_t = exp(int div b) along the path.
TEST(Jacobian, FormulaConvergesWithoutNoise) {
  const TorusGrid g(2, 32);
  const SpectralField b = gradient(SpectralField::scalar(g, [](const Point& x) { return 0.5 * std::cos(x[0]) + 0.3 * std::sin(x[1]); }));
  const std::vector<Point> pts = label_grid_points(2, 4);
  std::vector<double> err;
  for (double dt : {1e-2, 5e-3}) {
    const auto drv = BrownianDriver::from_streams(1, 2, dt, std::lround(0.5 / dt), 0, 0);
    err.push_back(jacobian_formula_check({b}, {}, drv, drv.n_steps(), pts).final_rel_mismatch);
  }
  EXPECT_LT(err[0], 1e-4);
  EXPECT_LT(err[1], err[0] / 3.0);
}
