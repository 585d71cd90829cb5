#include "kelvinlab/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>

#include "kelvinlab/error.hpp"
#include "kelvinlab/field_io.hpp"
#include "kelvinlab/parallel.hpp"

namespace kelvinlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat3 matmul(const Mat3& a, const Mat3& b, int d) {
  Mat3 r{};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      r[i * 3 + j] = s;
    }
  return r;
}

// A vector field sampled off-grid, or a constant one.
struct Sampled {
  std::unique_ptr<PointSampler> sampler;
  Point value{0.0, 0.0, 0.0};

  static Sampled of(const NoiseMember& m) {
    Sampled s;
    if (m.constant)
      s.value = m.value;
    else
      s.sampler = std::make_unique<PointSampler>(m.jet.f);
    return s;
  }
  static Sampled of(const SpectralField& f) {
    Sampled s;
    s.sampler = std::make_unique<PointSampler>(f);
    return s;
  }

  void eval(int d, const Point& x, double* v, double* J) const {
    if (!sampler) {
      for (int i = 0; i < d; ++i) v[i] = value[i];
      if (J) std::fill(J, J + 9, 0.0);
      return;
    }
    if (!J) {
      sampler->sample(x, v, nullptr);
      return;
    }
    double g[9];
    sampler->sample(x, v, g);
    std::fill(J, J + 9, 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) J[i * 3 + j] = g[i * d + j];
  }
};

struct StepContext {
  int d = 2;
  double dt = 0.0;
  bool heun = true;
  bool defgrad = false;
  const Sampled* b0 = nullptr;  // drift at t_n
  const Sampled* b1 = nullptr;  // drift at t_{n+1}
  std::vector<const Sampled*> channels;
  std::vector<double> inc;
};

struct Tend {
  double v[3] = {0.0, 0.0, 0.0};
  Mat3 JF{};  // (grad b) F + sum (grad xi) F inc
};

// Increment of (X, F) over one step using the fields frozen at one stage.
Tend stage(const StepContext& c, const Sampled& b, const Point& X, const Mat3& F) {
  const int d = c.d;
  Tend t;
  double v[3] = {0.0, 0.0, 0.0};
  Mat3 J{};
  b.eval(d, X, v, c.defgrad ? J.data() : nullptr);
  for (int i = 0; i < d; ++i) t.v[i] = v[i] * c.dt;
  Mat3 G{};
  if (c.defgrad)
    for (int q = 0; q < 9; ++q) G[q] = J[q] * c.dt;
  for (std::size_t k = 0; k < c.channels.size(); ++k) {
    const double w = c.inc[k];
    if (w == 0.0) continue;
    c.channels[k]->eval(d, X, v, c.defgrad ? J.data() : nullptr);
    for (int i = 0; i < d; ++i) t.v[i] += v[i] * w;
    if (c.defgrad)
      for (int q = 0; q < 9; ++q) G[q] += J[q] * w;
  }
  if (c.defgrad) t.JF = matmul(G, F, d);
  return t;
}

void step_particle(const StepContext& c, Point& X, Mat3& F) {
  const int d = c.d;
  const Tend t0 = stage(c, *c.b0, X, F);
  if (!c.heun) {
    for (int i = 0; i < d; ++i) X[i] += t0.v[i];
    if (c.defgrad)
      for (int q = 0; q < 9; ++q) F[q] += t0.JF[q];
    return;
  }
  Point Xp = X;
  Mat3 Fp = F;
  for (int i = 0; i < d; ++i) Xp[i] += t0.v[i];
  if (c.defgrad)
    for (int q = 0; q < 9; ++q) Fp[q] += t0.JF[q];
  const Tend t1 = stage(c, *c.b1, Xp, Fp);
  for (int i = 0; i < d; ++i) X[i] += 0.5 * (t0.v[i] + t1.v[i]);
  if (c.defgrad)
    for (int q = 0; q < 9; ++q) F[q] += 0.5 * (t0.JF[q] + t1.JF[q]);
}

void check_flow_inputs(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                       const FlowOptions& opt) {
  if (traj.snapshots.empty() || traj.save_stride != 1 ||
      traj.snapshots.size() != static_cast<std::size_t>(traj.n_steps + 1))
    throw InvalidArgument("advect: the field trajectory must store every step (save_stride = 1)");
  const BrownianDriver& fd = traj.driver;
  if (driver.w_seed() != fd.w_seed() || driver.dt() != fd.dt() || driver.refinement() != fd.refinement() ||
      driver.channels_w() != fd.channels_w() || driver.n_steps() < traj.n_steps)
    throw InvalidArgument("advect: driver W increments or time mesh differ from the field run");
  if (driver.channels_w() != model.channels())
    throw InvalidArgument("advect: driver channel count differs from the basis size");
  if (opt.use_b && driver.channels_b() != model.basis().size_b())
    throw InvalidArgument("advect: driver B channel count differs from the eta basis size");
  if (opt.store_stride < 1) throw InvalidArgument("advect: store_stride must be >= 1");
}

}  // namespace

std::string to_string(Flavor f) { return f == Flavor::strat ? "strat" : "ito"; }

Flavor flavor_from_string(const std::string& s) {
  if (s == "strat") return Flavor::strat;
  if (s == "ito") return Flavor::ito;
  throw InvalidArgument("unknown flow flavor '" + s + "'");
}

Mat3 identity_mat() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

double det(const Mat3& m, int d) {
  if (d == 2) return m[0] * m[4] - m[1] * m[3];
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

// ---------------------------------------------------------------------------

MaterialLoop::MaterialLoop(int d, std::vector<Point> points, std::array<int, 3> winding)
    : d_(d), pts_(std::move(points)), winding_(winding) {
  if (d != 2 && d != 3) throw InvalidArgument("MaterialLoop: dimension must be 2 or 3");
  if (pts_.size() < 3) throw ValidationError("MaterialLoop: need at least 3 points");
  for (const auto& p : pts_)
    for (int a = 0; a < d; ++a)
      if (!std::isfinite(p[a])) throw ValidationError("MaterialLoop: non-finite point");
  if (d == 2) winding_[2] = 0;
}

std::vector<Point> MaterialLoop::tangents() const {
  const std::size_t P = pts_.size();
  std::vector<Point> t(P, Point{0.0, 0.0, 0.0});
  std::vector<double> q(P);
  for (int a = 0; a < d_; ++a) {
    const double lift = kTwoPi * winding_[a];
    for (std::size_t j = 0; j < P; ++j) q[j] = pts_[j][a] - lift * static_cast<double>(j) / static_cast<double>(P);
    auto dq = periodic_derivative(q);
    for (std::size_t j = 0; j < P; ++j) t[j][a] = dq[j] + lift;
  }
  return t;
}

namespace {

double gap(const Point& a, const Point& b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += (b[i] - a[i]) * (b[i] - a[i]);
  return std::sqrt(s);
}

}  // namespace

double MaterialLoop::max_gap() const {
  const std::size_t P = pts_.size();
  double m = 0.0;
  for (std::size_t j = 0; j + 1 < P; ++j) m = std::max(m, gap(pts_[j], pts_[j + 1], d_));
  Point wrap = pts_[0];
  for (int a = 0; a < d_; ++a) wrap[a] += kTwoPi * winding_[a];
  return std::max(m, gap(pts_[P - 1], wrap, d_));
}

double MaterialLoop::mean_gap() const {
  const std::size_t P = pts_.size();
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < P; ++j) s += gap(pts_[j], pts_[j + 1], d_);
  Point wrap = pts_[0];
  for (int a = 0; a < d_; ++a) wrap[a] += kTwoPi * winding_[a];
  s += gap(pts_[P - 1], wrap, d_);
  return s / static_cast<double>(P);
}

MaterialLoop MaterialLoop::reversed() const {
  std::vector<Point> r(pts_.size());
  // s -> -s keeps s = 0 fixed.
  r[0] = pts_[0];
  for (std::size_t j = 1; j < pts_.size(); ++j) {
    r[j] = pts_[pts_.size() - j];
    for (int a = 0; a < d_; ++a) r[j][a] -= kTwoPi * winding_[a];
  }
  std::array<int, 3> w{-winding_[0], -winding_[1], -winding_[2]};
  return MaterialLoop(d_, std::move(r), w);
}

MaterialLoop MaterialLoop::refined() const {
  const std::size_t P = pts_.size();
  const std::size_t m = 2 * P;
  std::vector<Point> out(m, Point{0.0, 0.0, 0.0});
  std::vector<double> q(P);
  for (int a = 0; a < d_; ++a) {
    const double lift = kTwoPi * winding_[a];
    for (std::size_t j = 0; j < P; ++j) q[j] = pts_[j][a] - lift * static_cast<double>(j) / static_cast<double>(P);
    auto r = periodic_resample(q, m);
    for (std::size_t j = 0; j < m; ++j) out[j][a] = r[j] + lift * static_cast<double>(j) / static_cast<double>(m);
  }
  return MaterialLoop(d_, std::move(out), winding_);
}

double MaterialLoop::signed_area() const {
  if (!contractible()) throw InvalidArgument("signed_area: loop is not contractible");
  const auto t = tangents();
  double s = 0.0;
  for (std::size_t j = 0; j < pts_.size(); ++j) s += pts_[j][0] * t[j][1] - pts_[j][1] * t[j][0];
  return 0.5 * s / static_cast<double>(pts_.size());
}

MaterialLoop make_circle(int d, const Point& center, double radius, int P) {
  if (!(radius > 0.0) || !(radius < std::numbers::pi))
    throw ValidationError("make_loop: circle radius must lie in (0, pi)");
  if (P < 3) throw ValidationError("make_loop: need P >= 3");
  std::vector<Point> pts(P);
  for (int j = 0; j < P; ++j) {
    const double th = kTwoPi * j / P;
    pts[j] = {center[0] + radius * std::cos(th), center[1] + radius * std::sin(th), d == 3 ? center[2] : 0.0};
  }
  return MaterialLoop(d, std::move(pts));
}

MaterialLoop make_axis_line(int d, double c, int P, int axis, const Point& offset) {
  if (P < 3) throw ValidationError("make_loop: need P >= 3");
  if (axis < 0 || axis >= d) throw ValidationError("make_loop: axis out of range");
  std::vector<Point> pts(P);
  std::array<int, 3> w{0, 0, 0};
  w[axis] = 1;
  for (int j = 0; j < P; ++j) {
    Point p = offset;
    if (d == 2) {
      p = {0.0, 0.0, 0.0};
      p[1 - axis] = c;
    }
    p[axis] = kTwoPi * j / P;
    pts[j] = p;
  }
  return MaterialLoop(d, std::move(pts), w);
}

MaterialLoop make_loop(int d, const LoopSpec& spec) {
  switch (spec.kind) {
    case LoopKind::circle:
      return make_circle(d, spec.center, spec.radius, spec.P);
    case LoopKind::axis_line:
      return make_axis_line(d, spec.center[spec.axis == 0 ? 1 : 0], spec.P, spec.axis, spec.center);
    case LoopKind::custom: {
      if (spec.points.size() < 3) throw ValidationError("make_loop: custom loop needs at least 3 points");
      if (spec.winding == std::array<int, 3>{0, 0, 0}) {
        // A contractible closed curve through collinear points encloses nothing.
        const Point& p0 = spec.points[0];
        double scale = 0.0, worst = 0.0;
        Point dir{0.0, 0.0, 0.0};
        for (const auto& p : spec.points) {
          const double g = gap(p0, p, d);
          if (g > scale) {
            scale = g;
            for (int a = 0; a < 3; ++a) dir[a] = (p[a] - p0[a]) / g;
          }
        }
        if (scale == 0.0) throw ValidationError("make_loop: custom points coincide");
        for (const auto& p : spec.points) {
          Point r{p[0] - p0[0], p[1] - p0[1], d == 3 ? p[2] - p0[2] : 0.0};
          const double along = r[0] * dir[0] + r[1] * dir[1] + r[2] * dir[2];
          for (int a = 0; a < 3; ++a) r[a] -= along * dir[a];
          worst = std::max(worst, std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]));
        }
        if (worst <= 1e-10 * scale) throw ValidationError("make_loop: custom points are collinear");
      }
      return MaterialLoop(d, spec.points, spec.winding);
    }
  }
  throw InvalidArgument("make_loop: unknown kind");
}

// ---------------------------------------------------------------------------

FlowEnsemble advect(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                    const std::vector<Point>& x0, const FlowOptions& opt) {
  check_flow_inputs(traj, model, driver, opt);
  const TorusGrid& g = model.grid();
  const int d = g.dim();
  const NoiseBasis& basis = model.basis();
  const bool heun = traj.scheme == Scheme::strat_heun;
  // Drift of the simulated form: Heun integrates the Stratonovich form, EM the Ito form.
  double c_ind = 0.0;
  if (heun && opt.flavor == Flavor::ito) c_ind = -1.0;
  if (!heun && opt.flavor == Flavor::strat) c_ind = 1.0;
  const double cu = model.is_passive() ? 0.0 : 1.0;
  const bool with_b = opt.use_b && model.nu() > 0.0 && basis.size_b() > 0;
  const double sb = std::sqrt(2.0 * model.nu());

  SpectralField extra(g, d);
  if (c_ind != 0.0 && basis.size_w() > 0) extra.axpy(c_ind, basis.induced_drift());
  if (c_ind != 0.0 && with_b) extra.axpy(c_ind * 2.0 * model.nu(), basis.induced_drift_eta());

  std::vector<Sampled> chans;
  for (const auto& m : basis.xi_members()) chans.push_back(Sampled::of(m));
  if (with_b)
    for (const auto& m : basis.eta_members()) chans.push_back(Sampled::of(m));

  auto drift_at = [&](long n) { return Sampled::of(cu * traj.snapshots[n] + extra); };

  FlowEnsemble out;
  out.d = d;
  out.flavor = opt.flavor;
  out.scheme = traj.scheme;
  std::vector<Point> X = x0;
  std::vector<Mat3> F(x0.size(), identity_mat());
  out.times.push_back(0.0);
  out.positions.push_back(X);
  if (opt.defgrad) out.defgrad.push_back(F);

  StepContext c;
  c.d = d;
  c.dt = traj.dt;
  c.heun = heun;
  c.defgrad = opt.defgrad;
  for (const auto& s : chans) c.channels.push_back(&s);
  c.inc.resize(chans.size());

  std::vector<double> dW(driver.channels_w()), dB(driver.channels_b());
  Sampled b0 = drift_at(0);
  for (long n = 0; n < traj.n_steps; ++n) {
    Sampled b1 = heun ? drift_at(n + 1) : Sampled{};
    driver.sample_increments(n, dW.data(), dB.data());
    std::size_t k = 0;
    for (double w : dW) c.inc[k++] = w;
    if (with_b)
      for (double b : dB) c.inc[k++] = sb * b;
    c.b0 = &b0;
    c.b1 = heun ? &b1 : &b0;
    parallel_for(X.size(), opt.workers, [&](std::size_t p) { step_particle(c, X[p], F[p]); });
    for (const auto& p : X)
      for (int a = 0; a < d; ++a)
        if (!std::isfinite(p[a])) throw StabilityError("advect: non-finite particle position", n);
    if ((n + 1) % opt.store_stride == 0 || n + 1 == traj.n_steps) {
      out.times.push_back(static_cast<double>(n + 1) * traj.dt);
      out.positions.push_back(X);
      if (opt.defgrad) out.defgrad.push_back(F);
    }
    b0 = heun ? std::move(b1) : drift_at(n + 1);
  }
  return out;
}

FlowEnsemble evolve_deformation(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                                const std::vector<Point>& x0, FlowOptions opt) {
  opt.defgrad = true;
  return advect(traj, model, driver, x0, opt);
}

LoopFlow advect_loop(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                     const MaterialLoop& loop, const FlowOptions& opt, std::size_t max_points) {
  LoopFlow lf;
  lf.initial = loop;
  for (;;) {
    lf.flow = advect(traj, model, driver, lf.initial.points(), opt);
    bool ok = true;
    for (const auto& pts : lf.flow.positions)
      if (!lf.initial.moved(pts).spacing_ok()) {
        ok = false;
        break;
      }
    if (ok) return lf;
    if (2 * lf.initial.size() > max_points)
      throw ResolutionError("advect_loop: loop spacing stays unresolved at P = " +
                            std::to_string(lf.initial.size()));
    lf.initial = lf.initial.refined();
    ++lf.refinements;
  }
}

// ---------------------------------------------------------------------------

JacobianReport jacobian_formula_check(const std::vector<SpectralField>& b, const std::vector<SpectralField>& xi,
                                      const BrownianDriver& driver, long n_steps, const std::vector<Point>& pts,
                                      Scheme scheme) {
  if (b.empty()) throw InvalidArgument("jacobian_formula_check: need at least one drift field");
  if (b.size() != 1 && b.size() != static_cast<std::size_t>(n_steps + 1))
    throw InvalidArgument("jacobian_formula_check: drift list must hold 1 or n_steps + 1 fields");
  if (driver.channels_w() != static_cast<int>(xi.size()) || driver.n_steps() < n_steps)
    throw InvalidArgument("jacobian_formula_check: driver does not match the noise fields");
  const TorusGrid& g = b.front().grid();
  const int d = g.dim();
  const double dt = driver.dt();
  const bool heun = scheme == Scheme::strat_heun;
  const std::size_t K = xi.size();

  // Heun integrates the equivalent Stratonovich flow with drift b - 1/2 sum xi.grad xi.
  SpectralField ind = induced_drift(xi, g);
  std::vector<Sampled> chans;
  std::vector<Sampled> divxi;
  for (const auto& f : xi) {
    chans.push_back(Sampled::of(f));
    divxi.push_back(Sampled::of(divergence(f)));
  }
  auto drift_field = [&](long n) { return b.size() == 1 ? b[0] : b[n]; };
  auto stepping_drift = [&](long n) {
    SpectralField f = drift_field(n);
    if (heun && K > 0) f -= ind;
    return Sampled::of(f);
  };

  // Integrand of the dt part at a point: div b - 1/2 sum tr(J_xi^2), and for
  // Heun also the Ito-to-Stratonovich term -1/2 sum xi.grad(div xi).
  auto dt_density = [&](const PointSampler& divb, const Point& x) {
    double v[3], J[9];
    double s = 0.0;
    divb.sample(x, &s, nullptr);
    for (std::size_t k = 0; k < K; ++k) {
      chans[k].eval(d, x, v, J);
      double tr2 = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) tr2 += J[i * 3 + j] * J[j * 3 + i];
      s -= 0.5 * tr2;
      if (heun) {
        double dv = 0.0, gd[3] = {0.0, 0.0, 0.0};
        divxi[k].sampler->sample(x, &dv, gd);
        double c = 0.0;
        for (int j = 0; j < d; ++j) c += v[j] * gd[j];
        s -= 0.5 * c;
      }
    }
    return s;
  };
  auto div_xi_at = [&](std::size_t k, const Point& x) {
    double v = 0.0;
    divxi[k].sampler->sample(x, &v, nullptr);
    return v;
  };

  const std::size_t np = pts.size();
  std::vector<Point> X = pts;
  std::vector<Mat3> F(np, identity_mat());
  std::vector<double> L(np, 0.0);

  StepContext c;
  c.d = d;
  c.dt = dt;
  c.heun = heun;
  c.defgrad = true;
  for (const auto& s : chans) c.channels.push_back(&s);
  c.inc.resize(K);

  JacobianReport rep;
  std::vector<double> dW(driver.channels_w()), dB(driver.channels_b());
  Sampled b0 = stepping_drift(0);
  auto divb0 = std::make_unique<PointSampler>(divergence(drift_field(0)));
  for (long n = 0; n < n_steps; ++n) {
    driver.sample_increments(n, dW.data(), dB.data());
    for (std::size_t k = 0; k < K; ++k) c.inc[k] = dW[k];
    Sampled b1 = stepping_drift(n + 1);
    auto divb1 = std::make_unique<PointSampler>(divergence(drift_field(n + 1)));
    c.b0 = &b0;
    c.b1 = &b1;
    for (std::size_t p = 0; p < np; ++p) {
      const Point x0 = X[p];
      step_particle(c, X[p], F[p]);
      const double s0 = dt_density(*divb0, x0);
      double noise0 = 0.0;
      for (std::size_t k = 0; k < K; ++k) noise0 += div_xi_at(k, x0) * dW[k];
      if (heun) {
        const double s1 = dt_density(*divb1, X[p]);
        double noise1 = 0.0;
        for (std::size_t k = 0; k < K; ++k) noise1 += div_xi_at(k, X[p]) * dW[k];
        L[p] += 0.5 * (s0 + s1) * dt + 0.5 * (noise0 + noise1);
      } else {
        L[p] += s0 * dt + noise0;
      }
      const double e = std::exp(L[p]);
      const double rel = std::abs(det(F[p], d) - e) / e;
      rep.max_rel_mismatch = std::max(rep.max_rel_mismatch, rel);
      if (n + 1 == n_steps) rep.final_rel_mismatch = std::max(rep.final_rel_mismatch, rel);
    }
    b0 = std::move(b1);
    divb0 = std::move(divb1);
  }
  rep.log_det_direct.resize(np);
  rep.log_det_formula = L;
  for (std::size_t p = 0; p < np; ++p) rep.log_det_direct[p] = std::log(std::abs(det(F[p], d)));
  return rep;
}

// ---------------------------------------------------------------------------

LabelTrajectory solve_back_to_labels(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                                     const LabelOptions& opt) {
  FlowOptions fo;
  fo.use_b = model.viscous();
  check_flow_inputs(traj, model, driver, fo);
  if (opt.save_stride < 0) throw InvalidArgument("solve_back_to_labels: save_stride must be >= 0");
  const TorusGrid& g = model.grid();
  const int d = g.dim();
  const std::size_t N = g.size();
  const NoiseBasis& basis = model.basis();
  const bool with_b = model.viscous() && basis.size_b() > 0;
  const double sb = std::sqrt(2.0 * model.nu());
  const double dt = traj.dt;
  const double cu = model.is_passive() ? 0.0 : 1.0;

  // V = u dt + sum xi dW + sqrt(2 nu) sum eta dB on the grid.
  auto velocity_increment = [&](const SpectralField& u, const std::vector<double>& dW, const std::vector<double>& dB) {
    std::vector<double> V(N * d, 0.0);
    auto add = [&](double w, std::span<const double> f) {
      if (w == 0.0) return;
      for (std::size_t i = 0; i < N * d; ++i) V[i] += w * f[i];
    };
    add(cu * dt, u.physical());
    for (int k = 0; k < basis.size_w(); ++k) add(dW[k], basis.xi(k).jet.f.physical());
    if (with_b)
      for (int k = 0; k < basis.size_b(); ++k) add(sb * dB[k], basis.eta(k).jet.f.physical());
    return V;
  };

  double grad_max = 0.0;
  // -(V + V.grad a), dealiased.
  auto tendency = [&](const SpectralField& a, const std::vector<double>& V) {
    std::vector<SpectralField> da;
    da.reserve(d);
    for (int j = 0; j < d; ++j) da.push_back(partial(a, j));
    std::vector<double> out(N * d);
    for (int i = 0; i < d; ++i) {
      for (std::size_t x = 0; x < N; ++x) {
        double s = V[i * N + x];
        for (int j = 0; j < d; ++j) {
          const double gij = da[j].physical()[i * N + x];
          grad_max = std::max(grad_max, std::abs(gij));
          s += V[j * N + x] * gij;
        }
        out[i * N + x] = -s;
      }
    }
    return dealiased_from_physical(g, d, std::move(out));
  };

  LabelTrajectory lt;
  SpectralField a(g, d);
  lt.times.push_back(0.0);
  lt.a.push_back(a);
  std::vector<double> dW(driver.channels_w()), dB(driver.channels_b());
  for (long n = 0; n < traj.n_steps; ++n) {
    driver.sample_increments(n, dW.data(), dB.data());
    grad_max = 0.0;
    const SpectralField t0 = tendency(a, velocity_increment(traj.snapshots[n], dW, dB));
    if (grad_max > opt.steepening_bound)
      throw ResolutionError("solve_back_to_labels: label map steepened at step " + std::to_string(n) +
                            " (max |grad a| = " + std::to_string(grad_max) + ")");
    SpectralField pred = a + t0;
    const SpectralField t1 = tendency(pred, velocity_increment(traj.snapshots[n + 1], dW, dB));
    a.axpy(0.5, t0);
    a.axpy(0.5, t1);
    for (double v : a.physical())
      if (!std::isfinite(v)) throw StabilityError("solve_back_to_labels: non-finite displacement", n);
    const bool last = n + 1 == traj.n_steps;
    if (last || (opt.save_stride > 0 && (n + 1) % opt.save_stride == 0)) {
      lt.times.push_back(static_cast<double>(n + 1) * dt);
      lt.a.push_back(a);
    }
  }
  return lt;
}

std::vector<Point> label_grid_points(int d, int n) {
  if ((d != 2 && d != 3) || n < 1) throw InvalidArgument("label_grid_points: bad dimension or size");
  const double h = kTwoPi / n;
  std::vector<Point> pts;
  const int nz = d == 3 ? n : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) pts.push_back({i * h, j * h, d == 3 ? k * h : 0.0});
  return pts;
}

void write_loop_csv(const std::string& path, const FlowEnsemble& flow) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("write_loop_csv: cannot open " + path);
  os << "t,s_index";
  for (int a = 0; a < flow.d; ++a) os << ",x_" << (a + 1);
  os << '\n';
  for (std::size_t t = 0; t < flow.times.size(); ++t)
    for (std::size_t j = 0; j < flow.positions[t].size(); ++j) {
      os << format_double(flow.times[t]) << ',' << j;
      for (int a = 0; a < flow.d; ++a) os << ',' << format_double(flow.positions[t][j][a]);
      os << '\n';
    }
}

}  // namespace kelvinlab
