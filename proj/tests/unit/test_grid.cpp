#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include "kelvinlab/error.hpp"
#include "kelvinlab/field_io.hpp"
#include "kelvinlab/grid.hpp"
#include "kelvinlab/parallel.hpp"
#include "kelvinlab/stats.hpp"

using namespace kelvinlab;

namespace {

constexpr double kPi = std::numbers::pi;

double max_diff(const SpectralField& a, const SpectralField& b) { return max_abs(a - b); }

SpectralField vec2(const TorusGrid& g, double (*fx)(const Point&), double (*fy)(const Point&)) {
  return SpectralField::vector(g, [&](const Point& x) { return Point{fx(x), fy(x), 0.0}; });
}

}  // namespace

TEST(TorusGrid, Geometry) {
  const TorusGrid g(2, 64);
  EXPECT_EQ(g.size(), 64u * 64u);
  EXPECT_EQ(g.nh(), 33);
  EXPECT_EQ(g.kmax(), 21);
  EXPECT_EQ(TorusGrid(3, 16).kmax(), 5);
  EXPECT_NEAR(g.length(), 2 * kPi, 1e-15);
  EXPECT_NEAR(g.volume(), 4 * kPi * kPi, 1e-12);
  EXPECT_EQ(g.wavenumber(40), -24);
  // x is the fastest index
  EXPECT_NEAR(g.node(1)[0], g.spacing(), 1e-15);
  EXPECT_NEAR(g.node(64)[1], g.spacing(), 1e-15);
}

TEST(TorusGrid, RejectsBadSizes) {
  EXPECT_THROW(TorusGrid(4, 16), InvalidArgument);
  EXPECT_THROW(TorusGrid(2, 7), InvalidArgument);
}

TEST(Spectral, DerivativesOfTrigPolynomials) {
  const TorusGrid g(2, 32);
  const SpectralField f = SpectralField::scalar(g, [](const Point& x) { return std::sin(3 * x[0]) * std::cos(2 * x[1]); });
  const SpectralField fx = SpectralField::scalar(g, [](const Point& x) { return 3 * std::cos(3 * x[0]) * std::cos(2 * x[1]); });
  const SpectralField lap = SpectralField::scalar(g, [](const Point& x) { return -13 * std::sin(3 * x[0]) * std::cos(2 * x[1]); });
  EXPECT_LT(max_diff(partial(f, 0), fx), 1e-12);
  EXPECT_LT(max_diff(laplacian(f), lap), 1e-11);
  EXPECT_LT(max_diff(divergence(gradient(f)), lap), 1e-11);
}

TEST(Spectral, CurlOfGradientVanishes3D) {
  const TorusGrid g(3, 16);
  const SpectralField f = random_field(g, 1, 3, 4);
  EXPECT_LT(max_abs(curl(gradient(f))), 1e-12);
  EXPECT_LT(max_abs(divergence(curl(random_field(g, 3, 4, 4)))), 1e-12);
}

TEST(Spectral, LerayProjection) {
  const TorusGrid g(2, 32);
  const SpectralField grad = gradient(random_field(g, 1, 5, 6));
  const SpectralField sol = random_field(g, 2, 6, 6, true);
  EXPECT_LT(divergence_ratio(sol), 1e-13);
  EXPECT_LT(max_abs(leray_project(grad)), 1e-12);
  EXPECT_LT(max_diff(leray_project(sol + grad), sol), 1e-12);
  const SpectralField v = random_field(g, 2, 7, 6);
  const SpectralField p = leray_project(v);
  EXPECT_LT(max_diff(leray_project(p), p), 1e-13);
}

TEST(Spectral, PoissonSolveInvertsMinusLaplacian) {
  const TorusGrid g(2, 32);
  SpectralField rhs = random_field(g, 1, 8, 5);
  double dropped = 1.0;
  const SpectralField q = poisson_solve(rhs, &dropped);
  EXPECT_NEAR(dropped, 0.0, 1e-14);
  EXPECT_LT(max_diff(-laplacian(q), rhs), 1e-12);
}

TEST(Spectral, TranslateShiftsArgument) {
  const TorusGrid g(2, 32);
  const Point s{0.37, -1.1, 0.0};
  const SpectralField f = SpectralField::scalar(g, [](const Point& x) { return std::sin(x[0]) + std::cos(2 * x[1]); });
  const SpectralField want = SpectralField::scalar(
      g, [&](const Point& x) { return std::sin(x[0] - s[0]) + std::cos(2 * (x[1] - s[1])); });
  EXPECT_LT(max_diff(translate(f, s), want), 1e-12);
}

TEST(Spectral, DealiasedProductOfResolvedModes) {
  const TorusGrid g(2, 32);
  const SpectralField a = SpectralField::scalar(g, [](const Point& x) { return std::sin(3 * x[0]); });
  const SpectralField b = SpectralField::scalar(g, [](const Point& x) { return std::cos(4 * x[1]); });
  const SpectralField ab = SpectralField::scalar(g, [](const Point& x) { return std::sin(3 * x[0]) * std::cos(4 * x[1]); });
  EXPECT_LT(max_diff(multiply(a, b), ab), 1e-13);
  // a mode beyond the 2/3 band is removed
  const SpectralField hi = SpectralField::scalar(g, [](const Point& x) { return std::sin(14 * x[0]); });
  EXPECT_LT(max_abs(dealias(hi)), 1e-14);
  EXPECT_FALSE(hi.band_limited());
}

TEST(Spectral, InnerProductIsAnIntegral) {
  const TorusGrid g(2, 16);
  const SpectralField s = SpectralField::scalar(g, [](const Point& x) { return std::sin(x[0]); });
  // int sin^2 over the torus = 2 pi^2
  EXPECT_NEAR(inner_product(s, s), 2 * kPi * kPi, 1e-12);
  EXPECT_NEAR(spectral_inner_product(s, s), 2 * kPi * kPi, 1e-12);
  EXPECT_NEAR(norm_l2(s), std::sqrt(2.0) * kPi, 1e-12);
}

TEST(Spectral, MismatchedOperandsThrow) {
  const SpectralField a = random_field(TorusGrid(2, 16), 1, 1, 3);
  const SpectralField b = random_field(TorusGrid(2, 32), 1, 1, 3);
  EXPECT_THROW(a + b, InvalidArgument);
  EXPECT_THROW(curl(random_field(TorusGrid(2, 16), 1, 1, 3)), InvalidArgument);
}

TEST(PointSampler, MatchesClosedForm) {
  const TorusGrid g(2, 32);
  const SpectralField u = vec2(
      g, [](const Point& x) { return std::sin(2 * x[1]) + 0.5 * std::cos(x[0]); },
      [](const Point& x) { return std::cos(3 * x[0] - x[1]); });
  const PointSampler ps(u);
  const Point p{0.123, 4.567, 0.0};
  double v[2], gr[4];
  ps.sample(p, v, gr);
  EXPECT_NEAR(v[0], std::sin(2 * p[1]) + 0.5 * std::cos(p[0]), 1e-13);
  EXPECT_NEAR(v[1], std::cos(3 * p[0] - p[1]), 1e-13);
  EXPECT_NEAR(gr[0], -0.5 * std::sin(p[0]), 1e-12);
  EXPECT_NEAR(gr[1], 2 * std::cos(2 * p[1]), 1e-12);
  EXPECT_NEAR(gr[2], -3 * std::sin(3 * p[0] - p[1]), 1e-12);
  EXPECT_NEAR(gr[3], std::sin(3 * p[0] - p[1]), 1e-12);
}

TEST(Periodic, DerivativeAndResample) {
  const int P = 32;
  std::vector<double> v(P);
  for (int j = 0; j < P; ++j) v[j] = std::sin(2 * kPi * j / P);
  const auto d = periodic_derivative(v);
  for (int j = 0; j < P; ++j) EXPECT_NEAR(d[j], 2 * kPi * std::cos(2 * kPi * j / P), 1e-11);
  const auto r = periodic_resample(v, 96);
  for (int j = 0; j < 96; ++j) EXPECT_NEAR(r[j], std::sin(2 * kPi * j / 96), 1e-13);
}

TEST(FieldIo, RoundTripBothFormats) {
  const TorusGrid g(2, 16);
  const SpectralField u = random_field(g, 2, 11, 4, true);
  const auto dir = std::filesystem::temp_directory_path();
  for (auto fmt : {DumpFormat::binary, DumpFormat::csv}) {
    const std::string path = (dir / (fmt == DumpFormat::binary ? "kl_rt.bin" : "kl_rt.csv")).string();
    write_field(path, u, 0.25, fmt);
    FieldHeader h;
    const SpectralField back = read_field(path, &h);
    EXPECT_EQ(h.d, 2);
    EXPECT_EQ(h.n_per_axis, 16);
    EXPECT_EQ(h.rank, 2);
    EXPECT_DOUBLE_EQ(h.time, 0.25);
    EXPECT_EQ(max_diff(back, u), 0.0);
    std::filesystem::remove(path);
  }
}

TEST(FieldIo, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(FieldIo, FormatDoubleRoundTrips) {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Stats, SlopeMeanAndStderr) {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 12, 48, 192};
  EXPECT_NEAR(loglog_slope(x, y), 2.0, 1e-12);
  const std::vector<double> v{1, 2, 3, 4};
  const SampleStats s = sample_stats(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.stddev, std::sqrt(5.0 / 3.0), 1e-14);
  EXPECT_NEAR(s.stderr_mean, std::sqrt(5.0 / 3.0) / 2.0, 1e-14);
  const std::vector<double> same(5, 0.7);
  EXPECT_EQ(sample_stats(same).stderr_mean, 0.0);
  EXPECT_EQ(sample_stats(same).mean, 0.7);
  EXPECT_NEAR(correlation(x, y), 1.0, 0.1);
  EXPECT_DOUBLE_EQ(pairwise_sum(v), 10.0);
}

TEST(Parallel, CoversRangeAndRethrowsLowestIndex) {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 3, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 30 || i == 80) throw std::runtime_error(std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "30");
  }
}
