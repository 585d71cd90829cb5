#include <gtest/gtest.h>

#include <cmath>

#include "kelvinlab/error.hpp"
#include "kelvinlab/grid.hpp"
#include "kelvinlab/lie.hpp"

using namespace kelvinlab;

namespace {

SpectralField vf(const TorusGrid& g, std::function<Point(const Point&)> fn) { return SpectralField::vector(g, fn); }

}  // namespace

// xi = (sin y, 0), w = (0, sin x): [xi, w] = xi.grad w - w.grad xi = (-sin x cos y, sin y cos x)
TEST(Lie, BracketClosedForm) {
  const TorusGrid g(2, 32);
  const auto xi = vf(g, [](const Point& x) { return Point{std::sin(x[1]), 0, 0}; });
  const auto w = vf(g, [](const Point& x) { return Point{0, std::sin(x[0]), 0}; });
  const auto want = vf(g, [](const Point& x) {
    return Point{-std::sin(x[0]) * std::cos(x[1]), std::sin(x[1]) * std::cos(x[0]), 0};
  });
  EXPECT_LT(max_abs(lie_bracket(xi, w) - want), 1e-13);
  EXPECT_LT(max_abs(lie_bracket(xi, w) + lie_bracket(w, xi)), 1e-14);
}

// xi = (sin y, 0), u = (cos y, sin x):
// (L^T_xi u)_1 = xi.grad u_1 + d_1 xi . u = 0 + 0
// (L^T_xi u)_2 = xi.grad u_2 + d_2 xi . u = sin y cos x + cos y cos y
TEST(Lie, TransposeClosedForm) {
  const TorusGrid g(2, 32);
  const auto xi = vf(g, [](const Point& x) { return Point{std::sin(x[1]), 0, 0}; });
  const auto u = vf(g, [](const Point& x) { return Point{std::cos(x[1]), std::sin(x[0]), 0}; });
  const auto want = vf(g, [](const Point& x) {
    return Point{0, std::sin(x[1]) * std::cos(x[0]) + std::cos(x[1]) * std::cos(x[1]), 0};
  });
  EXPECT_LT(max_abs(lie_transpose(xi, u) - want), 1e-13);
  EXPECT_LT(max_abs(lie_transpose(make_jet(xi), make_jet(u)) - want), 1e-13);
}

TEST(Lie, DirectionalOnScalars) {
  const TorusGrid g(2, 32);
  const auto xi = vf(g, [](const Point& x) { return Point{std::cos(x[1]), 2.0, 0}; });
  const auto f = SpectralField::scalar(g, [](const Point& x) { return std::sin(x[0] + x[1]); });
  const auto want =
      SpectralField::scalar(g, [](const Point& x) { return (std::cos(x[1]) + 2.0) * std::cos(x[0] + x[1]); });
  EXPECT_LT(max_abs(directional(xi, f) - want), 1e-13);
}

TEST(Lie, AdjointPairing) {
  const TorusGrid g(2, 32);
  const auto xi = random_field(g, 2, 1, 4, true);
  const auto v = random_field(g, 2, 2, 4);
  const auto w = random_field(g, 2, 3, 4, true);
  EXPECT_LT(adjoint_pairing_residual(xi, v, w), 1e-12);
  EXPECT_THROW(adjoint_pairing_residual(random_field(g, 2, 4, 4), v, w), PreconditionError);
}

TEST(Lie, DoubleTransposeModesAgree) {
  const TorusGrid g(3, 16);
  const auto xi = random_field(g, 3, 5, 2, true);
  const auto u = random_field(g, 3, 6, 2, true);
  const auto a = double_lie_transpose(xi, u, DoubleLieMode::composed);
  const auto b = double_lie_transpose(xi, u, DoubleLieMode::expanded);
  const auto c = double_lie_transpose(xi, u, DoubleLieMode::cross3d);
  const double s = norm_l2(a);
  EXPECT_LT(norm_l2(leray_project(a - b)) / s, 1e-10);
  EXPECT_LT(norm_l2(leray_project(a - c)) / s, 1e-10);
}

TEST(Lie, CrossAndDotOfConstants) {
  const TorusGrid g(3, 8);
  const auto ex = vf(g, [](const Point&) { return Point{1, 0, 0}; });
  const auto ey = vf(g, [](const Point&) { return Point{0, 1, 0}; });
  const auto ez = vf(g, [](const Point&) { return Point{0, 0, 1}; });
  EXPECT_LT(max_abs(cross(ex, ey) - ez), 1e-14);
  EXPECT_LT(max_abs(dot(ex, ey)), 1e-14);
  EXPECT_NEAR(mean(dot(ez, ez)), 1.0, 1e-14);
}

TEST(Lie, IdentitySuite) {
  for (const auto& g : {TorusGrid(2, 32), TorusGrid(3, 16)}) {
    const auto reports = operator_identity_suite(g, 3);
    ASSERT_FALSE(reports.empty());
    for (const auto& r : reports) {
      EXPECT_LT(r.residual_l2, 1e-10) << r.identity_name << " on " << r.grid;
      EXPECT_EQ(r.field_seed, 3u);
    }
  }
}
