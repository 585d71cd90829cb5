// Acceptance suite. One line per criterion:
//   [PASS] C<n> <title>: <measurements>
// Usage: kelvinlab_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kelvinlab/config.hpp"
#include "kelvinlab/diagnostics.hpp"
#include "kelvinlab/dispatch.hpp"
#include "kelvinlab/ensemble.hpp"
#include "kelvinlab/field_io.hpp"
#include "kelvinlab/integrator.hpp"
#include "kelvinlab/lagrangian.hpp"
#include "kelvinlab/lie.hpp"
#include "kelvinlab/rng.hpp"
#include "kelvinlab/stats.hpp"

using namespace kelvinlab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
const std::vector<double> kDts{4e-3, 2e-3, 1e-3};

using clock_type = std::chrono::steady_clock;
double since(clock_type::time_point t0) { return std::chrono::duration<double>(clock_type::now() - t0).count(); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

// Desk-scale 2D setup: 64^2, dt 1e-3, T 0.2, trig basis amplitude 0.1 with two members.
const char* kDeskYaml = R"(
grid: {d: 2, n_per_axis: 64}
model: {family: euler_poincare}
basis: {kind: trig, amplitude: 0.1}
initial: {kind: random, seed: 7, kmax: 3, amplitude: 1.0}
time: {T: 0.2, dt: 1.0e-3, scheme: strat_heun}
seeds: {master: 2024}
diagnostics:
  label_n: 32
  loops:
    - {kind: circle, center: [3.141592653589793, 3.141592653589793], radius: 1.0, P: 256}
    - {kind: axis_line, c: 1.5707963267948966, P: 256}
)";

RunConfig desk() { return parse_config_string(kDeskYaml, "acceptance"); }

RunConfig with_family(RunConfig c, Family f, double nu = 0.0) {
  c.model.family = f;
  c.model.nu = nu;
  if (nu > 0.0) {
    c.basis.eta.kind = BasisKind::constant_euclidean;
    c.basis.eta.amplitude = 1.0;
  }
  return c;
}

RunConfig with_loop(RunConfig c, std::size_t i) {
  c.diagnostics.loops = {c.diagnostics.loops.at(i)};
  return c;
}

SweepReport dt_sweep(RunConfig c, const std::string& metric, int paths) {
  c.diagnostics.sweep.kind = SweepKind::dt_halving;
  c.diagnostics.sweep.points = kDts;
  c.diagnostics.sweep.metric = metric;
  c.diagnostics.sweep.paths = paths;
  return run_sweep(c, 1);
}

std::string describe(const SweepReport& r) {
  std::ostringstream os;
  os << r.metric << " {";
  for (std::size_t i = 0; i < r.points.size(); ++i) os << (i ? ", " : "") << sci(r.points[i].value);
  os << "} slope " << std::fixed;
  os.precision(2);
  os << r.slope;
  return os.str();
}

double slope_of(const std::vector<double>& x, const std::vector<double>& y) { return loglog_slope(x, y); }

// Shared fine Brownian mesh: driver for step dt on a path whose finest step is dt_min.
BrownianDriver sweep_driver(std::uint64_t w, std::uint64_t b, double dt, double T, int kw, int kb) {
  const int r = static_cast<int>(std::lround(dt / kDts.back()));
  return BrownianDriver::from_streams(w, b, dt, step_count(T, dt), kw, kb, r);
}

// ---------------------------------------------------------------------------

Outcome c1_identities() {
  Outcome o;
  const auto t0 = clock_type::now();
  double worst = 0.0;
  std::size_t count = 0;
  for (const auto& g : {TorusGrid(2, 64), TorusGrid(3, 16)}) {
    for (const auto& r : operator_identity_suite(g, 11)) {
      worst = std::max(worst, r.residual_l2);
      ++count;
      o.require(r.residual_l2 <= 1e-10, r.identity_name + " on " + r.grid);
    }
  }
  const double t = since(t0);
  o.require(t < 10.0, "runtime");
  o.detail << count << " identities on 64^2 and 16^3, max residual " << sci(worst) << ", " << sci(t) << " s";
  return o;
}

double c2_budget = -1.0;  // relative Kelvin residual at dt = 1e-3 (circle), reused by criterion 8

Outcome c2_kelvin() {
  Outcome o;
  const char* names[] = {"circle", "axis_line"};
  for (std::size_t l = 0; l < 2; ++l) {
    const SweepReport r = dt_sweep(with_loop(desk(), l), "kelvin", 4);
    const double e1 = r.points[0].value, e2 = r.points[1].value, e3 = r.points[2].value;
    const double extrapolated = e2 * (e2 / e1);
    o.require(r.slope >= 0.5, std::string(names[l]) + " slope");
    o.require(e3 <= 10.0 * extrapolated, std::string(names[l]) + " self-consistency");
    for (const auto& p : r.points) o.require(p.runtime_s / 4.0 < 120.0, "runtime per dt");
    if (l == 0) c2_budget = e3;
    o.detail << names[l] << ": " << describe(r) << ", extrapolated " << sci(extrapolated) << "; ";
  }
  return o;
}

Outcome c3_closure() {
  Outcome o;
  struct Case {
    Family f;
    double nu;
    PassiveKind pk;
    const char* name;
  };
  const Case cases[] = {{Family::euler_poincare, 0.0, PassiveKind::oneform, "euler_poincare"},
                        {Family::energy_euler, 0.0, PassiveKind::oneform, "energy_euler"},
                        {Family::ns_poincare, 0.01, PassiveKind::oneform, "ns_poincare"},
                        {Family::energy_ns, 0.01, PassiveKind::oneform, "energy_ns"},
                        {Family::passive_transport, 0.0, PassiveKind::oneform, "passive_transport"}};
  for (const auto& cs : cases) {
    for (Flavor fl : {Flavor::strat, Flavor::ito}) {
      RunConfig c = with_loop(with_family(desk(), cs.f, cs.nu), 0);
      c.model.passive_kind = cs.pk;
      c.diagnostics.flavor = fl;
      const SweepReport r = dt_sweep(c, "closure", 2);
      o.require(r.slope >= 0.5, std::string(cs.name) + "/" + to_string(fl));
      o.detail << cs.name << "/" << to_string(fl) << " " << describe(r) << "; ";
    }
  }
  return o;
}

Outcome c4_volume() {
  Outcome o;
  const SweepReport r = dt_sweep(desk(), "jacobian", 2);
  o.require(r.slope >= 0.5, "det slope");
  o.detail << "solenoidal " << describe(r) << "; ";

  // Compressible probes: steady gradient drift and two gradient noise fields.
  const TorusGrid g(2, 64);
  const std::vector<SpectralField> b{0.5 * gradient(random_field(g, 1, 31, 2))};
  const std::vector<SpectralField> xi{0.2 * gradient(random_field(g, 1, 32, 1)),
                                      0.2 * gradient(random_field(g, 1, 33, 1))};
  const std::vector<Point> probes = label_grid_points(2, 4);
  const double T = 0.2;
  std::vector<double> err(kDts.size(), 0.0);
  const int paths = 4;
  for (int p = 0; p < paths; ++p) {
    for (std::size_t i = 0; i < kDts.size(); ++i) {
      const BrownianDriver drv = sweep_driver(derive_seed(99, p), 5, kDts[i], T, 2, 0);
      err[i] += jacobian_formula_check(b, xi, drv, drv.n_steps(), probes).final_rel_mismatch / paths;
    }
  }
  const double s = slope_of(kDts, err);
  o.require(s >= 0.5, "compressible formula slope");
  o.detail << "compressible formula {" << sci(err[0]) << ", " << sci(err[1]) << ", " << sci(err[2]) << "} slope "
           << sci(s);
  return o;
}

// Single-path energy slopes scatter by about 0.25 around 1, hence 16 paths.
Outcome c5_energy() {
  Outcome o;
  const int paths = 16;
  const SweepReport ee = dt_sweep(with_loop(with_family(desk(), Family::energy_euler), 0), "energy", paths);
  o.require(ee.slope >= 1.0, "energy_euler slope");
  const SweepReport ns = dt_sweep(with_loop(with_family(desk(), Family::energy_ns, 0.01), 0), "energy", paths);
  o.require(ns.slope >= 1.0, "energy_ns slope");
  const SweepReport ep = dt_sweep(with_loop(desk(), 0), "energy", paths);
  o.require(ep.slope >= 0.5, "euler_poincare ledger slope");
  o.detail << "energy_euler " << describe(ee) << "; energy_ns " << describe(ns) << "; euler_poincare ledger "
           << describe(ep);
  return o;
}

// Constant xi: u_t(x) = v_t(x - sum_k xi_k W_k(t)) with v the deterministic Euler solution.
Outcome c6_constant_xi() {
  Outcome o;
  RunConfig sc = desk();
  sc.basis.xi.kind = BasisKind::constant_euclidean;
  sc.basis.xi.amplitude = 0.1;
  RunConfig dc = desk();
  dc.basis.xi.kind = BasisKind::none;
  const int paths = 2;
  std::vector<double> err(kDts.size(), 0.0);
  for (int p = 0; p < paths; ++p) {
    sc.seeds.w = derive_seed(sc.w_seed(), 1000 + p);
    for (std::size_t i = 0; i < kDts.size(); ++i) {
      const int r = static_cast<int>(std::lround(kDts[i] / kDts.back()));
      const Setup s = build_setup(sc, kDts[i], r);
      const Setup d = build_setup(dc, kDts[i], r);
      const FieldTrajectory ut = run_setup(s), vt = run_setup(d);
      const double n0 = norm_l2(ut.snapshots.front());
      Point W{0.0, 0.0, 0.0};
      double worst = 0.0;
      for (long n = 0; n <= s.n_steps; ++n) {
        if (n > 0) {
          const auto dW = s.driver.dW(n - 1);
          for (int k = 0; k < 2; ++k) W[k] += 0.1 * dW[k];
        }
        const double e = norm_l2(ut.snapshots[n] - translate(vt.snapshots[n], W)) / n0;
        worst = std::max(worst, e);
      }
      err[i] += worst / paths;
    }
  }
  const double s = slope_of(kDts, err);
  o.require(s >= 0.5, "slope");
  o.detail << "sup error {" << sci(err[0]) << ", " << sci(err[1]) << ", " << sci(err[2]) << "} slope " << sci(s);
  return o;
}

Outcome c7_weber_cauchy() {
  Outcome o;
  for (const char* m : {"weber", "weber_label", "cauchy"}) {
    const SweepReport r = dt_sweep(with_loop(desk(), 0), m, 2);
    o.require(r.slope >= 0.5, m);
    o.detail << describe(r) << "; ";
  }
  return o;
}

RunConfig ns_config(double nu) {
  RunConfig c = with_loop(with_family(desk(), Family::ns_poincare, nu), 0);
  if (nu == 0.0) {
    c.basis.eta.kind = BasisKind::constant_euclidean;
    c.basis.eta.amplitude = 1.0;
  }
  return c;
}

EnsembleOptions ens(const RunConfig& c, std::size_t M) {
  EnsembleOptions eo;
  eo.M = M;
  eo.b_seed_base = c.b_seed_base();
  eo.steepening_bound = c.diagnostics.steepening_bound;
  return eo;
}

Outcome c8_conditional() {
  Outcome o;
  const auto t0 = clock_type::now();
  const RunConfig c = ns_config(0.01);
  const Setup s = build_setup(c);
  const FieldTrajectory traj = run_setup(s);
  const ConditionalEstimate full = conditional_kelvin(s.model, traj, s.loops, ens(c, 1024)).front();
  const ConditionalEstimate e = full.subset(256);
  if (c2_budget < 0.0) c2_budget = dt_sweep(with_loop(desk(), 0), "kelvin", 4).points.back().value;
  const double scale = std::abs(circulation(traj.snapshots.front(), s.loops[0])) + norm_l2(traj.snapshots.front());
  const double budget = c2_budget * scale;
  const double gap = std::abs(e.mc_mean - e.target);
  o.require(gap <= 3.0 * e.mc_stderr + budget, "M = 256 estimate");
  const std::vector<double> Ms{64, 256, 1024};
  std::vector<double> se;
  for (double m : Ms) se.push_back(full.subset(static_cast<std::size_t>(m)).mc_stderr);
  const double slope = slope_of(Ms, se);
  o.require(std::abs(slope + 0.5) <= 0.1, "stderr slope");
  const double t = since(t0);
  o.require(t < 600.0, "runtime");
  o.detail << "target " << sci(e.target) << ", mean(256) " << sci(e.mc_mean) << ", stderr " << sci(e.mc_stderr)
           << ", gap " << sci(gap) << " <= " << sci(3.0 * e.mc_stderr + budget) << "; stderr {" << sci(se[0]) << ", "
           << sci(se[1]) << ", " << sci(se[2]) << "} slope " << sci(slope) << ", failures " << full.failures << ", "
           << sci(t) << " s";
  return o;
}

// Independent deterministic Navier-Stokes reference in vorticity form, same Heun stepping.
SpectralField vorticity_ns_reference(const SpectralField& u0, double nu, double T, double dt) {
  auto velocity = [](const SpectralField& w) {
    const SpectralField psi = poisson_solve(w);
    const SpectralField px = partial(psi, 0), py = partial(psi, 1);
    std::vector<double> v(px.physical().size() * 2);
    const std::size_t N = px.physical().size();
    for (std::size_t i = 0; i < N; ++i) {
      v[i] = py.physical()[i];
      v[N + i] = -px.physical()[i];
    }
    return SpectralField::from_physical(w.grid(), 2, std::move(v));
  };
  auto rhs = [&](const SpectralField& w) {
    const SpectralField u = velocity(w);
    const SpectralField wx = partial(w, 0), wy = partial(w, 1);
    const std::size_t N = w.physical().size();
    std::vector<double> adv(N);
    for (std::size_t i = 0; i < N; ++i)
      adv[i] = -(u.physical()[i] * wx.physical()[i] + u.physical()[N + i] * wy.physical()[i]);
    return dealiased_from_physical(w.grid(), 1, std::move(adv)) + nu * laplacian(w);
  };
  SpectralField w = partial(u0.component(1), 0) - partial(u0.component(0), 1);
  const long n = step_count(T, dt);
  for (long i = 0; i < n; ++i) {
    const SpectralField k0 = rhs(w);
    const SpectralField k1 = rhs(w + dt * k0);
    w.axpy(0.5 * dt, k0);
    w.axpy(0.5 * dt, k1);
  }
  return velocity(w);
}

Outcome c9_degenerations() {
  Outcome o;
  {
    const RunConfig c = ns_config(0.0);
    const Setup s = build_setup(c);
    const FieldTrajectory traj = run_setup(s);
    const ConditionalEstimate e = conditional_kelvin(s.model, traj, s.loops, ens(c, 32)).front();
    const double scale = std::abs(circulation(traj.snapshots.front(), s.loops[0])) + norm_l2(traj.snapshots.front());
    if (c2_budget < 0.0) c2_budget = dt_sweep(with_loop(desk(), 0), "kelvin", 4).points.back().value;
    const double rel = std::abs(e.mc_mean - e.target) / scale;
    o.require(e.mc_stderr == 0.0, "nu = 0 stderr");
    o.require(rel <= c2_budget, "nu = 0 gap within the pathwise residual budget");
    o.detail << "nu=0: stderr " << sci(e.mc_stderr) << ", relative gap " << sci(rel) << " (pathwise budget "
             << sci(c2_budget) << "); ";
  }
  {
    RunConfig c = ns_config(0.01);
    c.basis.xi.kind = BasisKind::none;
    const Setup s = build_setup(c);
    const FieldTrajectory traj = run_setup(s);
    const SpectralField ref = vorticity_ns_reference(s.u0, 0.01, c.time.T, c.time.dt);
    const double diff = norm_l2(traj.final() - ref) / norm_l2(ref);
    o.require(diff <= 1e-6, "deterministic NS reference");
    const ConditionalEstimate e = conditional_kelvin(s.model, traj, s.loops, ens(c, 256)).front();
    const double gap = std::abs(e.mc_mean - e.target);
    o.require(gap <= 3.0 * e.mc_stderr, "classical Constantin-Iyer estimate");
    o.detail << "xi empty: field vs vorticity reference " << sci(diff) << "; CI target " << sci(e.target) << ", mean "
             << sci(e.mc_mean) << ", gap " << sci(gap) << " <= 3 stderr " << sci(3.0 * e.mc_stderr);
  }
  return o;
}

const char* k3dYaml = R"(
grid: {d: 3, n_per_axis: 16}
model: {family: euler_poincare}
basis: {kind: trig, amplitude: 0.1}
initial: {kind: random, seed: 5, kmax: 1, amplitude: 1.0}
time: {T: 0.048, dt: 1.0e-3}
seeds: {master: 77}
diagnostics:
  label_n: 16
  loops:
    - {kind: circle, center: [3.141592653589793, 3.141592653589793, 3.141592653589793], radius: 1.0}
)";

Outcome c10_3d() {
  Outcome o;
  const auto t0 = clock_type::now();
  const RunConfig c = parse_config_string(k3dYaml, "acceptance-3d");
  const SweepReport h = dt_sweep(c, "helicity", 2);
  o.require(h.slope >= 0.5, "helicity slope");
  const SweepReport ca = dt_sweep(c, "cauchy", 1);
  o.require(ca.slope >= 0.5, "Cauchy slope");

  // Passive pair: A as a one-form, B = curl A as a vector field, same driver.
  RunConfig pa = c;
  pa.model.family = Family::passive_transport;
  pa.model.passive_kind = PassiveKind::oneform;
  RunConfig pb = pa;
  pb.model.passive_kind = PassiveKind::vectorfield;
  const int paths = 2;
  std::vector<double> drift(kDts.size(), 0.0);
  for (int p = 0; p < paths; ++p) {
    pa.seeds.w = pb.seeds.w = derive_seed(c.w_seed(), 500 + p);
    for (std::size_t i = 0; i < kDts.size(); ++i) {
      const int r = static_cast<int>(std::lround(kDts[i] / kDts.back()));
      const Setup sa = build_setup(pa, kDts[i], r);
      const Setup sb = build_setup(pb, kDts[i], r);
      const SpectralField B0 = curl(sa.u0);
      const FieldTrajectory A = run(sa.model, sa.u0, c.time.T, kDts[i], sa.driver, Scheme::strat_heun);
      const FieldTrajectory B = run(sb.model, B0, c.time.T, kDts[i], sb.driver, Scheme::strat_heun);
      const double m0 = magnetic_helicity(sa.u0, B0);
      drift[i] += std::abs(magnetic_helicity(A.final(), B.final()) - m0) / std::abs(m0) / paths;
    }
  }
  const double ms = slope_of(kDts, drift);
  o.require(ms >= 0.5, "magnetic helicity slope");
  const double t = since(t0);
  o.require(t < 300.0, "runtime");
  o.detail << "helicity " << describe(h) << "; " << describe(ca) << "; magnetic helicity {" << sci(drift[0]) << ", "
           << sci(drift[1]) << ", " << sci(drift[2]) << "} slope " << sci(ms) << "; " << sci(t) << " s";
  return o;
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

Outcome c11_reproducibility() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "kelvinlab_acceptance_repro";
  fs::remove_all(root);
  RunConfig k = desk();
  k.time.T = 0.05;
  k.diagnostics.which = {"kelvin", "energy", "weber"};
  k.output.dump_fields = true;
  k.output.field_format = DumpFormat::csv;
  k.time.save_stride = 10;
  RunConfig ci = ns_config(0.01);
  ci.time.T = 0.05;
  ci.diagnostics.M = 16;
  std::size_t files = 0;
  for (const auto& [sub, cfg] : std::vector<std::pair<std::string, RunConfig>>{{"run", k}, {"cikelvin", ci}}) {
    std::vector<std::map<std::string, std::string>> outs;
    for (const auto& [tag, threads] : std::vector<std::pair<std::string, int>>{{"a1", 1}, {"b1", 1}, {"c3", 3}}) {
      DispatchOptions opt;
      opt.out_dir = (root / (sub + "_" + tag)).string();
      opt.threads = threads;
      std::ostringstream sink;
      auto* old = std::cout.rdbuf(sink.rdbuf());
      dispatch(sub, cfg, opt);
      std::cout.rdbuf(old);
      outs.push_back(read_dir(opt.out_dir));
    }
    const std::size_t csvs = std::count_if(outs[0].begin(), outs[0].end(),
                                           [](const auto& kv) { return kv.first.ends_with(".csv"); });
    o.require(csvs > 0, sub + " produced no CSV");
    o.require(outs[0] == outs[1], sub + " rerun differs");
    o.require(outs[0] == outs[2], sub + " thread count changes output");
    files += outs[0].size();
  }
  fs::remove_all(root);
  o.detail << files << " artifacts (run, cikelvin) byte-identical across reruns and 1/3 threads";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"operator identity suite", c1_identities},
      {"pathwise Kelvin convergence", c2_kelvin},
      {"circulation transport closure", c3_closure},
      {"volume preservation and Jacobian formula", c4_volume},
      {"energy theorems", c5_energy},
      {"constant-xi equivalence", c6_constant_xi},
      {"Weber and Cauchy residuals", c7_weber_cauchy},
      {"conditional Kelvin", c8_conditional},
      {"degenerations", c9_degenerations},
      {"3D tiny-grid suite", c10_3d},
      {"reproducibility", c11_reproducibility},
  };
  std::set<int> only;
  std::ofstream report;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--report" && i + 1 < argc)
      report.open(argv[++i]);
    else
      only.insert(std::atoi(argv[i]));
  }
  auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    if (report) report << line << std::endl;
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = clock_type::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += o.pass ? 0 : 1;
    std::ostringstream line;
    line << (o.pass ? "[PASS] " : "[FAIL] ") << "C" << id << " " << criteria[i].first << ": " << o.detail.str()
         << " (" << std::fixed << std::setprecision(1) << since(t0) << " s)";
    emit(line.str());
  }
  emit(failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : "acceptance: all passed");
  return failed ? 1 : 0;
}
