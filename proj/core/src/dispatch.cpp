#include "kelvinlab/dispatch.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <numbers>
#include <sstream>

#include "kelvinlab/diagnostics.hpp"
#include "kelvinlab/ensemble.hpp"
#include "kelvinlab/error.hpp"
#include "kelvinlab/field_io.hpp"
#include "kelvinlab/lie.hpp"
#include "kelvinlab/rng.hpp"
#include "kelvinlab/stats.hpp"

namespace fs = std::filesystem;

namespace kelvinlab {

SpectralField build_initial(const RunConfig& cfg, const TorusGrid& g) {
  const int d = g.dim();
  const InitialConfig& ic = cfg.initial;
  const double A = ic.amplitude;
  switch (ic.kind) {
    case InitialKind::random: {
      if (ic.kmax < 1 || ic.kmax > g.kmax())
        throw ConfigError("initial.kmax", 0, "must lie in [1, " + std::to_string(g.kmax()) + "] on this grid");
      SpectralField u = random_field(g, d, ic.seed, ic.kmax, true);
      const double m = max_abs(u);
      if (m > 0.0) u *= A / m;
      return u;
    }
    case InitialKind::shear:
      return SpectralField::vector(g, [&](const Point& x) { return Point{A * std::sin(x[1]), 0.0, 0.0}; });
    case InitialKind::abc:
      if (d != 3) throw ConfigError("initial.kind", 0, "abc needs d = 3");
      return SpectralField::vector(g, [&](const Point& x) {
        return Point{A * (std::sin(x[2]) + std::cos(x[1])), A * (std::sin(x[0]) + std::cos(x[2])),
                     A * (std::sin(x[1]) + std::cos(x[0]))};
      });
    case InitialKind::file: {
      FieldHeader h;
      SpectralField u = read_field(ic.file, &h);
      if (!(u.grid() == g)) throw ValidationError("initial field " + ic.file + " is not on the configured grid");
      if (!u.is_vector()) throw ValidationError("initial field " + ic.file + " is not a vector field");
      if (divergence_ratio(u) > 1e-8) throw ValidationError("initial field " + ic.file + " is not solenoidal");
      return u;
    }
  }
  throw InvalidArgument("build_initial: unknown kind");
}

Setup build_setup(const RunConfig& cfg, double dt, int refinement) {
  if (!(dt > 0.0)) dt = cfg.time.dt;
  const TorusGrid grid(cfg.grid.d, cfg.grid.n_per_axis, cfg.grid.dealias);
  auto basis = std::make_shared<const NoiseBasis>(build_basis(grid, cfg.basis));
  Model model(cfg.model, basis);
  const long n = step_count(cfg.time.T, dt);
  BrownianDriver driver = BrownianDriver::from_streams(cfg.w_seed(), cfg.b_seed(), dt, n, basis->size_w(),
                                                       basis->size_b(), refinement);
  std::vector<MaterialLoop> loops;
  for (const auto& spec : cfg.diagnostics.loops) loops.push_back(make_loop(cfg.grid.d, spec));
  SpectralField u0 = build_initial(cfg, grid);
  return Setup{cfg, grid, std::move(model), std::move(u0), driver, std::move(loops), dt, n};
}

FieldTrajectory run_setup(const Setup& s) {
  return run(s.model, s.u0, s.cfg.time.T, s.dt, s.driver, s.cfg.time.scheme, 1);
}

namespace {

FlowOptions loop_flow_options(const Setup& s, int workers) {
  FlowOptions fo;
  fo.flavor = s.cfg.diagnostics.flavor;
  fo.workers = workers;
  return fo;
}

double kelvin_scale(const SpectralField& u0, const MaterialLoop& loop) {
  return std::abs(circulation(u0, loop)) + norm_l2(u0);
}

FlowEnsemble label_flow(const Setup& s, const FieldTrajectory& traj, int workers, bool defgrad) {
  FlowOptions fo;
  fo.flavor = s.cfg.diagnostics.flavor;
  fo.workers = workers;
  fo.defgrad = defgrad;
  return advect(traj, s.model, s.driver, label_grid_points(s.grid.dim(), s.cfg.diagnostics.label_n), fo);
}

double max_det_error(const FlowEnsemble& f, std::vector<double>* per_time = nullptr) {
  double worst = 0.0;
  for (const auto& F : f.defgrad) {
    double w = 0.0;
    for (const auto& m : F) w = std::max(w, std::abs(det(m, f.d) - 1.0));
    if (per_time) per_time->push_back(w);
    worst = std::max(worst, w);
  }
  return worst;
}

double helicity_drift(const FieldTrajectory& traj, std::vector<double>* series = nullptr) {
  const double h0 = helicity(traj.snapshots.front());
  const double scale = std::abs(h0) > 0.0 ? std::abs(h0) : 1.0;
  double worst = 0.0;
  for (const auto& u : traj.snapshots) {
    const double r = std::abs(helicity(u) - h0) / scale;
    if (series) series->push_back(r);
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace

double dt_metric(const std::string& metric, const Setup& s, const FieldTrajectory& traj, int workers) {
  const SpectralField& u0 = traj.snapshots.front();
  if (metric == "kelvin" || metric == "closure") {
    double worst = 0.0;
    for (const auto& loop : s.loops) {
      const LoopFlow lf = advect_loop(traj, s.model, s.driver, loop, loop_flow_options(s, workers));
      const double scale = kelvin_scale(u0, loop);
      double v;
      if (metric == "kelvin")
        v = std::abs(kelvin_residual(traj, lf.initial, lf.flow, lf.flow.flavor).final());
      else
        v = std::abs(circulation_transport_decomposition(s.model, traj, lf.initial, lf.flow, lf.flow.flavor).closure.back());
      worst = std::max(worst, v / scale);
    }
    return worst;
  }
  if (metric == "energy") {
    const EnergyLedger led = energy_ledger(s.model, traj);
    return std::abs(led.closure.back()) / led.energy.front();
  }
  if (metric == "weber") {
    const FlowEnsemble f = label_flow(s, traj, workers, true);
    return weber_pullback(traj, f, s.cfg.diagnostics.label_n).residual.back();
  }
  if (metric == "weber_label") {
    LabelOptions lo;
    lo.steepening_bound = s.cfg.diagnostics.steepening_bound;
    return weber_label_grid(traj, solve_back_to_labels(traj, s.model, s.driver, lo)).residual.back();
  }
  if (metric == "cauchy") return std::abs(cauchy_residual(traj, label_flow(s, traj, workers, s.grid.dim() == 3)).final());
  if (metric == "jacobian") {
    std::vector<double> per;
    max_det_error(label_flow(s, traj, workers, true), &per);
    return per.back();
  }
  if (metric == "helicity") {
    std::vector<double> series;
    helicity_drift(traj, &series);
    return series.back();
  }
  throw InvalidArgument("unknown sweep metric '" + metric + "'");
}

std::string config_digest(const RunConfig& cfg) { return sha256_hex(resolved_config_json(cfg)); }

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"identities", "run",      "kelvin", "energy",
                                          "weber",      "cikelvin", "jacobian", "sweep"};
  return s;
}

namespace {

struct Context {
  fs::path dir;
  int threads = 1;
  std::map<std::string, std::string> outputs;  // file -> sha256
  std::ostringstream summary;
  std::string field_digest;

  std::string path(const std::string& name) const { return (dir / name).string(); }
  void record(const std::string& name) {
    std::ifstream is(path(name), std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    outputs[name] = sha256_hex(ss.str());
  }
  void csv(const std::string& name, const std::vector<double>& t, const std::vector<std::string>& cols,
           const std::vector<std::vector<double>>& v) {
    write_series_csv(path(name), t, cols, v);
    record(name);
  }
  void text(const std::string& name, const std::string& body) {
    std::ofstream os(path(name), std::ios::binary);
    if (!os) throw InvalidArgument("cannot write " + path(name));
    os << body << '\n';
    os.close();
    record(name);
  }
};

double tol_or(const RunConfig& cfg, double def) { return cfg.diagnostics.tolerance > 0.0 ? cfg.diagnostics.tolerance : def; }

std::string fmt(double v) { return format_double(v); }

bool do_identities(const RunConfig& cfg, Context& ctx) {
  const TorusGrid g(cfg.grid.d, cfg.grid.n_per_axis, cfg.grid.dealias);
  const auto rep = operator_identity_suite(g, cfg.initial.seed);
  const double tol = tol_or(cfg, 1e-10);
  std::ostringstream os;
  os << "identity,grid,field_seed,residual_l2\n";
  bool ok = true;
  for (const auto& r : rep) {
    os << r.identity_name << ',' << r.grid << ',' << r.field_seed << ',' << fmt(r.residual_l2) << '\n';
    const bool pass = r.residual_l2 <= tol;
    ok = ok && pass;
    ctx.summary << (pass ? "PASS " : "FAIL ") << r.identity_name << " residual " << fmt(r.residual_l2) << '\n';
  }
  std::string body = os.str();
  body.pop_back();
  ctx.text("identities.csv", body);
  return ok;
}

bool circulation_preserving(const Model& m) {
  const ModelSpec& s = m.spec();
  if (s.family == Family::euler_poincare) return true;
  if (s.family == Family::ns_poincare) return s.nu == 0.0;
  return false;
}

bool do_kelvin(const Setup& s, const FieldTrajectory& traj, Context& ctx) {
  const double tol = tol_or(s.cfg, 2e-2);
  const bool check = circulation_preserving(s.model);
  bool ok = true;
  for (std::size_t l = 0; l < s.loops.size(); ++l) {
    const LoopFlow lf = advect_loop(traj, s.model, s.driver, s.loops[l], loop_flow_options(s, ctx.threads));
    const TimeSeries kr = kelvin_residual(traj, lf.initial, lf.flow, lf.flow.flavor);
    const CirculationDecomposition dec =
        circulation_transport_decomposition(s.model, traj, lf.initial, lf.flow, lf.flow.flavor);
    const double scale = kelvin_scale(traj.snapshots.front(), lf.initial);
    std::vector<double> rel;
    for (double v : kr.values) rel.push_back(v / scale);
    const std::string name = "kelvin_loop" + std::to_string(l) + ".csv";
    ctx.csv(name, kr.times, {"residual", "relative_residual", "drift", "martingale", "closure"},
            {kr.values, rel, dec.drift, dec.martingale, dec.closure});
    write_loop_csv(ctx.path("loop" + std::to_string(l) + "_positions.csv"), lf.flow);
    ctx.record("loop" + std::to_string(l) + "_positions.csv");
    const double worst = kr.max_abs() / scale;
    const bool pass = !check || worst <= tol;
    ok = ok && pass;
    ctx.summary << (check ? (pass ? "PASS " : "FAIL ") : "INFO ") << "loop " << l << " relative Kelvin residual "
                << fmt(worst) << ", closure " << fmt(dec.max_closure() / scale) << ", refinements "
                << lf.refinements << '\n';
  }
  if (!check) ctx.summary << "INFO model is not circulation preserving; residuals reported, not checked\n";
  return ok;
}

bool do_energy(const Setup& s, const FieldTrajectory& traj, Context& ctx) {
  const EnergyLedger led = energy_ledger(s.model, traj);
  ctx.csv("energy.csv", led.times,
          {"energy", "dissipation_integral", "drift_noise_group", "viscous_group", "martingale_group", "closure"},
          {led.energy, led.dissipation_integral, led.drift_noise_group, led.viscous_group, led.martingale_group,
           led.closure});
  const double rel = led.max_closure() / led.energy.front();
  const bool pass = rel <= tol_or(s.cfg, 1e-2);
  ctx.summary << (pass ? "PASS " : "FAIL ") << "energy ledger relative closure " << fmt(rel) << '\n';
  return pass;
}

bool do_weber(const Setup& s, const FieldTrajectory& traj, Context& ctx) {
  const double tol = tol_or(s.cfg, 5e-2);
  const bool check = circulation_preserving(s.model);
  const FlowEnsemble f = label_flow(s, traj, ctx.threads, true);
  const MaterialLoop* loop = s.loops.empty() ? nullptr : &s.loops.front();
  LoopFlow lf;
  if (loop) {
    FlowOptions fo = loop_flow_options(s, ctx.threads);
    fo.defgrad = true;
    lf = advect_loop(traj, s.model, s.driver, *loop, fo);
  }
  const WeberReport pb = weber_pullback(traj, f, s.cfg.diagnostics.label_n, loop ? &lf.initial : nullptr,
                                        loop ? &lf.flow : nullptr);
  std::vector<std::string> cols{"pullback_residual"};
  std::vector<std::vector<double>> vals{pb.residual};
  if (!pb.loop_mismatch.empty()) {
    cols.push_back("loop_mismatch");
    vals.push_back(pb.loop_mismatch);
  }
  ctx.csv("weber_pullback.csv", pb.times, cols, vals);
  LabelOptions lo;
  lo.steepening_bound = s.cfg.diagnostics.steepening_bound;
  lo.save_stride = s.cfg.time.save_stride;
  const WeberReport lg = weber_label_grid(traj, solve_back_to_labels(traj, s.model, s.driver, lo));
  ctx.csv("weber_label_grid.csv", lg.times, {"reconstruction_residual"}, {lg.residual});
  const TimeSeries cr = cauchy_residual(traj, f);
  ctx.csv("cauchy.csv", cr.times, {"cauchy_residual"}, {cr.values});
  double w1 = 0.0, w2 = 0.0;
  for (double v : pb.residual) w1 = std::max(w1, v);
  for (double v : lg.residual) w2 = std::max(w2, v);
  const bool pass = !check || (w1 <= tol && w2 <= tol);
  const char* tag = check ? (pass ? "PASS " : "FAIL ") : "INFO ";
  ctx.summary << tag << "weber pullback " << fmt(w1) << ", label grid " << fmt(w2) << ", cauchy " << fmt(cr.max_abs())
              << '\n';
  return pass;
}

bool do_jacobian(const Setup& s, const FieldTrajectory& traj, Context& ctx) {
  const FlowEnsemble f = label_flow(s, traj, ctx.threads, true);
  std::vector<double> per;
  const double worst = max_det_error(f, &per);
  // Compressible probes: a steady gradient drift and gradient noise fields.
  const TorusGrid& g = s.grid;
  const int d = g.dim();
  std::vector<SpectralField> b{0.5 * gradient(random_field(g, 1, derive_seed(s.cfg.initial.seed, 0x4a), 2))};
  std::vector<SpectralField> xi;
  for (int k = 0; k < std::max(1, s.driver.channels_w()); ++k)
    xi.push_back(0.2 * gradient(random_field(g, 1, derive_seed(s.cfg.initial.seed, 0x100 + k), 1)));
  const BrownianDriver drv = BrownianDriver::from_streams(s.driver.w_seed(), s.driver.b_seed(), s.dt, s.n_steps,
                                                          static_cast<int>(xi.size()), 0, s.driver.refinement());
  std::vector<Point> probes;
  for (const auto& p : label_grid_points(d, 4)) probes.push_back(p);
  const JacobianReport jr = jacobian_formula_check(b, xi, drv, s.n_steps, probes, s.cfg.time.scheme);
  ctx.csv("jacobian.csv", f.times, {"max_abs_det_minus_one"}, {per});
  std::ostringstream os;
  os << "probe,log_det_direct,log_det_formula\n";
  for (std::size_t i = 0; i < jr.log_det_direct.size(); ++i)
    os << i << ',' << fmt(jr.log_det_direct[i]) << ',' << fmt(jr.log_det_formula[i]) << '\n';
  std::string body = os.str();
  body.pop_back();
  ctx.text("jacobian_formula.csv", body);
  const bool pass = worst <= tol_or(s.cfg, 1e-3);
  ctx.summary << (pass ? "PASS " : "FAIL ") << "max |det grad X - 1| " << fmt(worst)
              << "; INFO compressible formula mismatch " << fmt(jr.max_rel_mismatch) << '\n';
  return pass;
}

bool do_cikelvin(const Setup& s, const FieldTrajectory& traj, Context& ctx) {
  EnsembleOptions eo;
  eo.M = s.cfg.diagnostics.M;
  eo.b_seed_base = s.cfg.b_seed_base();
  eo.workers = ctx.threads;
  eo.steepening_bound = s.cfg.diagnostics.steepening_bound;
  const auto est = conditional_kelvin(s.model, traj, s.loops, eo);
  bool ok = true;
  nlohmann::json all = nlohmann::json::array();
  std::ostringstream mem;
  mem << "member";
  for (std::size_t l = 0; l < est.size(); ++l) mem << ",loop" << l;
  mem << '\n';
  for (std::size_t m = 0; m < eo.M; ++m) {
    mem << m;
    for (const auto& e : est) mem << ',' << fmt(e.members[m]);
    mem << '\n';
  }
  for (std::size_t l = 0; l < est.size(); ++l) {
    const auto& e = est[l];
    all.push_back(nlohmann::json::parse(e.to_json()));
    const double budget = tol_or(s.cfg, 1e-2 * kelvin_scale(traj.snapshots.front(), s.loops[l]));
    const double gap = std::abs(e.mc_mean - e.target);
    const bool pass = gap <= 3.0 * e.mc_stderr + budget;
    ok = ok && pass;
    ctx.summary << (pass ? "PASS " : "FAIL ") << "loop " << l << " target " << fmt(e.target) << " mean "
                << fmt(e.mc_mean) << " stderr " << fmt(e.mc_stderr) << " failures " << e.failures << '\n';
  }
  if (eo.M < 2) ctx.summary << "WARN M = 1: stderr is unreliable\n";
  ctx.text("cikelvin.json", all.dump(2));
  std::string body = mem.str();
  body.pop_back();
  ctx.text("cikelvin_members.csv", body);
  return ok;
}

bool do_run(const Setup& s, const FieldTrajectory& traj, Context& ctx) {
  const int stride = s.cfg.time.save_stride;
  const int d = s.grid.dim();
  std::vector<double> t, e, umax, div, hel;
  if (s.cfg.output.dump_fields) fs::create_directories(ctx.dir / "fields");
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    if (static_cast<long>(i) % stride != 0 && i + 1 != traj.snapshots.size()) continue;
    const SpectralField& u = traj.snapshots[i];
    t.push_back(traj.times[i]);
    e.push_back(0.5 * inner_product(u, u));
    umax.push_back(max_abs(u));
    div.push_back(divergence_ratio(u));
    if (d == 3) hel.push_back(helicity(u));
    if (s.cfg.output.dump_fields) {
      char name[64];
      std::snprintf(name, sizeof name, "fields/u_%06ld.%s", traj.steps[i],
                    s.cfg.output.field_format == DumpFormat::binary ? "bin" : "csv");
      write_field(ctx.path(name), u, traj.times[i], s.cfg.output.field_format);
      ctx.record(name);
    }
  }
  std::vector<std::string> cols{"energy", "max_abs_u", "divergence_ratio"};
  std::vector<std::vector<double>> vals{e, umax, div};
  if (d == 3) {
    cols.push_back("helicity");
    vals.push_back(hel);
  }
  if (s.cfg.output.csv) ctx.csv("run.csv", t, cols, vals);
  ctx.summary << "INFO run finished: " << traj.n_steps << " steps, final energy " << fmt(e.back()) << '\n';
  bool ok = true;
  for (const auto& w : s.cfg.diagnostics.which) {
    if (w == "kelvin")
      ok = do_kelvin(s, traj, ctx) && ok;
    else if (w == "energy")
      ok = do_energy(s, traj, ctx) && ok;
    else if (w == "weber" || w == "cauchy")
      ok = do_weber(s, traj, ctx) && ok;
    else if (w == "jacobian")
      ok = do_jacobian(s, traj, ctx) && ok;
    else if (w == "cikelvin")
      ok = do_cikelvin(s, traj, ctx) && ok;
    else if (w == "helicity") {
      if (d != 3) throw ConfigError("diagnostics.which", 0, "helicity needs d = 3");
      ctx.summary << "INFO helicity relative drift " << fmt(helicity_drift(traj)) << '\n';
    } else
      throw ConfigError("diagnostics.which", 0, "unknown diagnostic '" + w + "'");
  }
  return ok;
}

bool do_sweep(const RunConfig& cfg, Context& ctx) {
  const SweepReport rep = run_sweep(cfg, ctx.threads);
  std::ostringstream os;
  os << "point,value\n";
  for (const auto& p : rep.points) os << fmt(p.x) << ',' << fmt(p.value) << '\n';
  std::string body = os.str();
  body.pop_back();
  ctx.text("sweep.csv", body);
  nlohmann::json j{{"kind", rep.kind}, {"metric", rep.metric}, {"slope", rep.slope}};
  ctx.text("sweep.json", j.dump(2));
  for (const auto& p : rep.points)
    ctx.summary << "INFO " << rep.kind << ' ' << fmt(p.x) << ' ' << rep.metric << ' ' << fmt(p.value) << " ("
                << p.runtime_s << " s)\n";
  const bool pass = std::isfinite(rep.slope);
  ctx.summary << (pass ? "INFO " : "FAIL ") << "log-log slope " << fmt(rep.slope) << '\n';
  return pass;
}

fs::path resolve_out_dir(const RunConfig& cfg, const DispatchOptions& opt) {
  if (!opt.out_dir.empty()) return opt.out_dir;
  if (!cfg.output.directory.empty()) return cfg.output.directory;
  if (const char* env = std::getenv("KELVINLAB_OUT"); env && *env) return env;
  return "kelvinlab_out";
}

}  // namespace

int dispatch(const std::string& subcommand, const RunConfig& cfg, const DispatchOptions& opt) {
  Context ctx;
  ctx.dir = resolve_out_dir(cfg, opt);
  ctx.threads = std::max(1, opt.threads);
  fs::create_directories(ctx.dir);

  bool ok = true;
  if (subcommand == "identities") {
    ok = do_identities(cfg, ctx);
  } else if (subcommand == "sweep") {
    ok = do_sweep(cfg, ctx);
  } else {
    const Setup s = build_setup(cfg);
    if (subcommand == "cikelvin" && s.model.spec().family != Family::ns_poincare)
      throw PreconditionError("cikelvin needs model.family = ns_poincare");
    const FieldTrajectory traj = run_setup(s);
    ctx.field_digest = traj.digest();
    if (subcommand == "run")
      ok = do_run(s, traj, ctx);
    else if (subcommand == "kelvin")
      ok = do_kelvin(s, traj, ctx);
    else if (subcommand == "energy")
      ok = do_energy(s, traj, ctx);
    else if (subcommand == "weber")
      ok = do_weber(s, traj, ctx);
    else if (subcommand == "jacobian")
      ok = do_jacobian(s, traj, ctx);
    else if (subcommand == "cikelvin")
      ok = do_cikelvin(s, traj, ctx);
    else
      throw InvalidArgument("unknown subcommand '" + subcommand + "'");
  }

  nlohmann::json man;
  man["subcommand"] = subcommand;
  man["config"] = nlohmann::json::parse(resolved_config_json(cfg));
  man["config_sha256"] = config_digest(cfg);
  if (!ctx.field_digest.empty()) man["field_digest"] = ctx.field_digest;
  man["outputs"] = ctx.outputs;
  std::ofstream ms(ctx.dir / "manifest.json", std::ios::binary);
  ms << man.dump(2) << '\n';
  ms.close();
  std::cout << ctx.summary.str() << (ok ? "OK" : "CHECK FAILED") << ' ' << subcommand << " -> " << ctx.dir.string()
            << '\n';
  return ok ? 0 : 1;
}

}  // namespace kelvinlab
