#include "kelvinlab/ensemble.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>
#include <limits>

#include "kelvinlab/config.hpp"
#include "kelvinlab/diagnostics.hpp"
#include "kelvinlab/dispatch.hpp"
#include "kelvinlab/error.hpp"
#include "kelvinlab/parallel.hpp"
#include "kelvinlab/rng.hpp"
#include "kelvinlab/stats.hpp"

namespace kelvinlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_failures(std::size_t failures, std::size_t M, double max_fraction, const char* who) {
  if (static_cast<double>(failures) > max_fraction * static_cast<double>(M))
    throw ResolutionError(std::string(who) + ": " + std::to_string(failures) + " of " + std::to_string(M) +
                          " members failed");
}

void require_ns_setup(const Model& model, const FieldTrajectory& traj, const EnsembleOptions& opt, const char* who) {
  if (model.spec().family != Family::ns_poincare)
    throw PreconditionError(std::string(who) + ": needs the ns_poincare family");
  if (opt.M < 1) throw InvalidArgument(std::string(who) + ": M must be >= 1");
  if (traj.save_stride != 1) throw PreconditionError(std::string(who) + ": trajectory must store every step");
}

LabelTrajectory member_labels(const Model& model, const FieldTrajectory& traj, const EnsembleOptions& opt,
                              std::size_t m) {
  const BrownianDriver drv = traj.driver.with_b_seed(member_b_seed(opt.b_seed_base, m));
  LabelOptions lo;
  lo.steepening_bound = opt.steepening_bound;
  return solve_back_to_labels(traj, model, drv, lo);
}

}  // namespace

ConditionalEstimate ConditionalEstimate::subset(std::size_t m) const {
  if (m < 1 || m > members.size()) throw InvalidArgument("ConditionalEstimate::subset: bad member count");
  ConditionalEstimate e = *this;
  e.members.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(m));
  e.M = m;
  std::vector<double> ok;
  for (double v : e.members)
    if (std::isfinite(v)) ok.push_back(v);
  e.failures = m - ok.size();
  check_failures(e.failures, m, max_failure_fraction, "conditional_kelvin");
  const SampleStats s = sample_stats(ok);
  e.mc_mean = s.mean;
  e.mc_stderr = s.stderr_mean;
  return e;
}

std::string ConditionalEstimate::to_json() const {
  nlohmann::json j;
  j["target"] = target;
  j["mc_mean"] = mc_mean;
  j["mc_stderr"] = mc_stderr;
  j["M"] = M;
  j["failures"] = failures;
  j["seeds"] = {{"w", w_seed}, {"b_base", b_seed_base}};
  j["field_digest"] = field_digest;
  j["stderr_reliable"] = M - failures >= 2;
  return j.dump(2);
}

double image_loop_integral(const SpectralField& u0, const SpectralField& a, const MaterialLoop& loop) {
  require_vector(u0, "image_loop_integral");
  require_same_grid(u0, a, "image_loop_integral");
  const int d = u0.grid().dim();
  if (loop.dim() != d) throw InvalidArgument("image_loop_integral: loop dimension differs from the field");
  const PointSampler sa(a), su(u0);
  const auto tang = loop.tangents();
  std::vector<double> terms(loop.size());
  double av[3], ga[9], uv[3];
  for (std::size_t j = 0; j < loop.size(); ++j) {
    const Point& x = loop.points()[j];
    sa.sample(x, av, ga);
    Point y = x;
    for (int i = 0; i < d; ++i) y[i] += av[i];
    su.sample(y, uv);
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      // ((I + grad a)^T u0)_i = u0_i + sum_k d_i a_k u0_k
      double w = uv[i];
      for (int k = 0; k < d; ++k) w += ga[k * d + i] * uv[k];
      s += tang[j][i] * w;
    }
    terms[j] = s;
  }
  return pairwise_sum(terms) / static_cast<double>(loop.size());
}

std::vector<ConditionalEstimate> conditional_kelvin(const Model& model, const FieldTrajectory& traj,
                                                    const std::vector<MaterialLoop>& loops,
                                                    const EnsembleOptions& opt) {
  require_ns_setup(model, traj, opt, "conditional_kelvin");
  if (loops.empty()) throw InvalidArgument("conditional_kelvin: no loops");
  const SpectralField& u0 = traj.snapshots.front();
  const std::size_t L = loops.size();
  std::vector<double> vals(opt.M * L, kNaN);
  parallel_for(opt.M, opt.workers, [&](std::size_t m) {
    try {
      const LabelTrajectory lt = member_labels(model, traj, opt, m);
      for (std::size_t l = 0; l < L; ++l) vals[m * L + l] = image_loop_integral(u0, lt.final(), loops[l]);
    } catch (const ResolutionError&) {
    } catch (const StabilityError&) {
    }
  });
  const std::string digest = traj.digest();
  std::vector<ConditionalEstimate> out;
  for (std::size_t l = 0; l < L; ++l) {
    ConditionalEstimate e;
    e.target = circulation(traj.final(), loops[l]);
    e.w_seed = traj.driver.w_seed();
    e.b_seed_base = opt.b_seed_base;
    e.field_digest = digest;
    e.max_failure_fraction = opt.max_failure_fraction;
    for (std::size_t m = 0; m < opt.M; ++m) e.members.push_back(vals[m * L + l]);
    out.push_back(e.subset(opt.M));
  }
  return out;
}

ConditionalEstimate conditional_kelvin(const Model& model, const SpectralField& u0, const MaterialLoop& loop, double T,
                                       double dt, std::uint64_t w_seed, const EnsembleOptions& opt) {
  const long n = step_count(T, dt);
  const BrownianDriver drv = BrownianDriver::from_streams(w_seed, opt.b_seed_base, dt, n, model.channels(),
                                                          model.basis().size_b());
  const FieldTrajectory traj = run(model, u0, T, dt, drv, Scheme::strat_heun, 1);
  return conditional_kelvin(model, traj, {loop}, opt).front();
}

WeberEstimate conditional_weber(const Model& model, const FieldTrajectory& traj, const EnsembleOptions& opt) {
  require_ns_setup(model, traj, opt, "conditional_weber");
  const SpectralField& u0 = traj.snapshots.front();
  std::vector<SpectralField> recon(opt.M);
  std::vector<char> ok(opt.M, 0);
  parallel_for(opt.M, opt.workers, [&](std::size_t m) {
    try {
      recon[m] = weber_reconstruction(u0, member_labels(model, traj, opt, m).final());
      ok[m] = 1;
    } catch (const ResolutionError&) {
    } catch (const StabilityError&) {
    }
  });
  WeberEstimate w;
  w.M = opt.M;
  w.field_digest = traj.digest();
  w.mean_field = SpectralField(model.grid(), model.grid().dim());
  std::size_t good = 0;
  // Fixed member order keeps the sum independent of the worker count.
  for (std::size_t m = 0; m < opt.M; ++m) {
    if (!ok[m]) continue;
    w.mean_field += recon[m];
    ++good;
  }
  w.failures = opt.M - good;
  check_failures(w.failures, opt.M, opt.max_failure_fraction, "conditional_weber");
  w.mean_field *= 1.0 / static_cast<double>(good);
  const double nt = norm_l2(traj.final());
  w.distance = norm_l2(w.mean_field - traj.final()) / (nt > 0.0 ? nt : 1.0);
  return w;
}

// ---------------------------------------------------------------------------

SweepReport run_sweep(const RunConfig& cfg, int workers) {
  const SweepConfig& sw = cfg.diagnostics.sweep;
  if (sw.points.size() < 3) throw InvalidArgument("run_sweep: need at least 3 sweep points");
  SweepReport rep;
  rep.kind = to_string(sw.kind);
  rep.metric = sw.metric;
  if (sw.paths < 1) throw InvalidArgument("run_sweep: paths must be >= 1");
  // Path p > 0 uses an independent W stream derived from the configured one.
  auto path_cfg = [&](int p) {
    RunConfig c = cfg;
    if (p > 0) c.seeds.w = derive_seed(cfg.w_seed(), static_cast<std::uint64_t>(p));
    return c;
  };
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };

  switch (sw.kind) {
    case SweepKind::dt_halving: {
      double dt_min = sw.points.front();
      for (double p : sw.points) {
        if (!(p > 0.0)) throw InvalidArgument("run_sweep: dt values must be positive");
        dt_min = std::min(dt_min, p);
      }
      for (double dt : sw.points) {
        const double r = dt / dt_min;
        if (std::abs(r - std::round(r)) > 1e-9 * r)
          throw InvalidArgument("run_sweep: every dt must be an integer multiple of the smallest");
        const auto t0 = clock::now();
        std::vector<double> vals;
        for (int p = 0; p < sw.paths; ++p) {
          const Setup s = build_setup(path_cfg(p), dt, static_cast<int>(std::lround(r)));
          vals.push_back(dt_metric(sw.metric, s, run_setup(s), workers));
        }
        rep.points.push_back({dt, pairwise_sum(vals) / static_cast<double>(vals.size()), seconds(t0)});
      }
      break;
    }
    case SweepKind::m_scaling: {
      std::size_t mmax = 0;
      for (double p : sw.points) {
        if (!(p >= 2.0) || p != std::floor(p)) throw InvalidArgument("run_sweep: member counts must be integers >= 2");
        mmax = std::max(mmax, static_cast<std::size_t>(p));
      }
      const auto t0 = clock::now();
      const Setup s = build_setup(cfg);
      const FieldTrajectory traj = run_setup(s);
      EnsembleOptions eo;
      eo.M = mmax;
      eo.b_seed_base = cfg.b_seed_base();
      eo.workers = workers;
      eo.steepening_bound = cfg.diagnostics.steepening_bound;
      const ConditionalEstimate full = conditional_kelvin(s.model, traj, {s.loops.front()}, eo).front();
      const double t = seconds(t0);
      for (double p : sw.points) {
        const auto m = static_cast<std::size_t>(p);
        rep.points.push_back({p, full.subset(m).mc_stderr, t * static_cast<double>(m) / static_cast<double>(mmax)});
      }
      break;
    }
    case SweepKind::amplitude: {
      std::vector<SpectralField> base;
      for (int p = 0; p < sw.paths; ++p) {
        RunConfig ref = path_cfg(p);
        ref.basis.xi.amplitude = 0.0;
        base.push_back(run_setup(build_setup(ref)).final());
      }
      for (double a : sw.points) {
        if (!(a > 0.0)) throw InvalidArgument("run_sweep: amplitudes must be positive");
        const auto t0 = clock::now();
        std::vector<double> vals;
        for (int p = 0; p < sw.paths; ++p) {
          RunConfig c = path_cfg(p);
          c.basis.xi.amplitude = a;
          const SpectralField uT = run_setup(build_setup(c)).final();
          const double nb = norm_l2(base[p]);
          vals.push_back(norm_l2(uT - base[p]) / (nb > 0.0 ? nb : 1.0));
        }
        rep.points.push_back({a, pairwise_sum(vals) / static_cast<double>(vals.size()), seconds(t0)});
      }
      break;
    }
  }
  std::vector<double> xs, ys;
  for (const auto& p : rep.points) {
    xs.push_back(p.x);
    ys.push_back(p.value);
  }
  bool positive = true;
  for (double y : ys) positive = positive && y > 0.0;
  rep.slope = positive ? loglog_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

}  // namespace kelvinlab
