#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "kelvinlab/config.hpp"
#include "kelvinlab/diagnostics.hpp"
#include "kelvinlab/dispatch.hpp"
#include "kelvinlab/ensemble.hpp"
#include "kelvinlab/error.hpp"

using namespace kelvinlab;

namespace {

RunConfig ns_config(double nu) {
  return parse_config_string("grid: {d: 2, n_per_axis: 16}\n"
                             "model: {family: ns_poincare, nu: " + std::to_string(nu) + "}\n"
                             "basis: {kind: trig, amplitude: 0.1, eta: {kind: constant_euclidean, amplitude: 1.0}}\n"
                             "initial: {kind: random, seed: 3, kmax: 2, amplitude: 1.0}\n"
                             "time: {T: 0.05, dt: 1.0e-3}\n"
                             "seeds: {master: 11}\n"
                             "diagnostics:\n"
                             "  loops: [{kind: circle, center: [3.14159, 3.14159], radius: 1.0, P: 64}]\n");
}

EnsembleOptions options(const RunConfig& c, std::size_t M, int workers = 1) {
  EnsembleOptions o;
  o.M = M;
  o.b_seed_base = c.b_seed_base();
  o.workers = workers;
  return o;
}

}  // namespace

TEST(ImageLoopIntegral, ZeroDisplacementIsTheCirculation) {
  const TorusGrid g(2, 16);
  const SpectralField u = random_field(g, 2, 4, 3, true);
  const MaterialLoop c = make_circle(2, {3, 3, 0}, 1.0, 64);
  EXPECT_NEAR(image_loop_integral(u, SpectralField(g, 2), c), circulation(u, c), 1e-13);
}

// A constant displacement shifts the loop: the integral is the circulation of the translated field.
TEST(ImageLoopIntegral, ConstantDisplacement) {
  const TorusGrid g(2, 16);
  const SpectralField u = random_field(g, 2, 4, 3, true);
  const double s[2] = {0.4, -0.2};
  const SpectralField a = SpectralField::constant(g, s);
  const MaterialLoop c = make_circle(2, {3, 3, 0}, 1.0, 64);
  EXPECT_NEAR(image_loop_integral(u, a, c), circulation(translate(u, {-0.4, 0.2, 0}), c), 1e-12);
}

TEST(ConditionalKelvin, InviscidHasNoSpread) {
  const RunConfig c = ns_config(0.0);
  const kelvinlab::Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  const ConditionalEstimate e = conditional_kelvin(s.model, traj, s.loops, options(c, 8)).front();
  EXPECT_EQ(e.mc_stderr, 0.0);
  EXPECT_EQ(e.failures, 0u);
  EXPECT_NEAR(e.mc_mean, e.target, 1e-3 * (1 + std::abs(e.target)));
}

TEST(ConditionalKelvin, SubsetsAreNestedAndWorkerIndependent) {
  const RunConfig c = ns_config(0.05);
  const kelvinlab::Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  const ConditionalEstimate one = conditional_kelvin(s.model, traj, s.loops, options(c, 24, 1)).front();
  const ConditionalEstimate three = conditional_kelvin(s.model, traj, s.loops, options(c, 24, 3)).front();
  EXPECT_EQ(one.members, three.members);
  EXPECT_EQ(one.field_digest, three.field_digest);
  const ConditionalEstimate small = conditional_kelvin(s.model, traj, s.loops, options(c, 8, 2)).front();
  const ConditionalEstimate sub = one.subset(8);
  EXPECT_EQ(small.members, sub.members);
  EXPECT_EQ(small.mc_mean, sub.mc_mean);
  EXPECT_GT(one.mc_stderr, 0.0);
  EXPECT_THROW(one.subset(25), InvalidArgument);
}

TEST(ConditionalKelvin, MembersAreExchangeable) {
  // Members drawn from a different B base are another sample of the same law.
  const RunConfig c = ns_config(0.05);
  const kelvinlab::Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  EnsembleOptions o1 = options(c, 64), o2 = options(c, 64);
  o2.b_seed_base = c.b_seed_base() + 1;
  const auto a = conditional_kelvin(s.model, traj, s.loops, o1).front();
  const auto b = conditional_kelvin(s.model, traj, s.loops, o2).front();
  EXPECT_NE(a.members, b.members);
  const double se = std::hypot(a.mc_stderr, b.mc_stderr);
  EXPECT_LT(std::abs(a.mc_mean - b.mc_mean), 5 * se);
}

TEST(ConditionalKelvin, Preconditions) {
  RunConfig c = ns_config(0.05);
  c.model.family = Family::euler_poincare;
  const kelvinlab::Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  EXPECT_THROW(conditional_kelvin(s.model, traj, s.loops, options(c, 4)), PreconditionError);
  const kelvinlab::Setup ns = build_setup(ns_config(0.05));
  const FieldTrajectory thin = run(ns.model, ns.u0, 0.05, 1e-3, ns.driver, Scheme::strat_heun, 5);
  EXPECT_THROW(conditional_kelvin(ns.model, thin, ns.loops, options(c, 4)), PreconditionError);
}

TEST(ConditionalKelvin, JsonRecord) {
  const RunConfig c = ns_config(0.05);
  const kelvinlab::Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  const auto e = conditional_kelvin(s.model, traj, s.loops, options(c, 1)).front();
  const std::string j = e.to_json();
  EXPECT_NE(j.find("\"stderr_reliable\": false"), std::string::npos);
  EXPECT_NE(j.find(traj.digest()), std::string::npos);
}

TEST(ConditionalWeber, MeanFieldIsCloseForSmallViscosity) {
  const RunConfig c = ns_config(0.01);
  const kelvinlab::Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  const WeberEstimate w = conditional_weber(s.model, traj, options(c, 16, 2));
  EXPECT_EQ(w.failures, 0u);
  EXPECT_LT(w.distance, 0.05);
  EXPECT_EQ(w.field_digest, traj.digest());
}

TEST(Sweep, MemberScalingFollowsInverseSqrt) {
  RunConfig c = ns_config(0.05);
  c.diagnostics.sweep.kind = SweepKind::m_scaling;
  c.diagnostics.sweep.points = {16, 64, 256};
  const SweepReport r = run_sweep(c, 1);
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_NEAR(r.slope, -0.5, 0.2);
}

TEST(Sweep, RejectsShortOrIncommensurateSweeps) {
  RunConfig c = ns_config(0.05);
  c.diagnostics.sweep.points = {1e-3, 2e-3};
  EXPECT_THROW(run_sweep(c, 1), InvalidArgument);
  c.diagnostics.sweep.points = {1e-3, 2.5e-3, 5e-3};
  EXPECT_THROW(run_sweep(c, 1), InvalidArgument);
}
