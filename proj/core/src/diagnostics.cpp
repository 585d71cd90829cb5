#include "kelvinlab/diagnostics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <fstream>

#include "kelvinlab/error.hpp"
#include "kelvinlab/field_io.hpp"
#include "kelvinlab/lie.hpp"

namespace kelvinlab {

double TimeSeries::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

namespace {

double max_abs_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::size_t snapshot_index(const FieldTrajectory& traj, double t) {
  const long n = std::lround(t / traj.dt);
  auto it = std::find(traj.steps.begin(), traj.steps.end(), n);
  if (it == traj.steps.end())
    throw InvalidArgument("diagnostics: no field snapshot at t = " + format_double(t));
  return static_cast<std::size_t>(it - traj.steps.begin());
}

void require_every_step(const FieldTrajectory& traj, const char* op) {
  if (traj.save_stride != 1 || traj.snapshots.size() != static_cast<std::size_t>(traj.n_steps + 1))
    throw InvalidArgument(std::string(op) + ": the field trajectory must be saved every step");
}

void require_every_step(const FieldTrajectory& traj, const FlowEnsemble& flow, const char* op) {
  require_every_step(traj, op);
  if (flow.positions.size() != static_cast<std::size_t>(traj.n_steps + 1))
    throw InvalidArgument(std::string(op) + ": the loop flow must store every step");
}

// L^T_xi v for a basis member (symbol route when xi is constant).
SpectralField lie_t(const NoiseMember& m, const SpectralField& v) {
  if (m.constant) return constant_directional(v, m.value);
  return lie_transpose(m.jet, make_jet(v));
}

}  // namespace

double circulation(const SpectralField& u, const MaterialLoop& loop) {
  return circulations({&u}, loop).front();
}

std::vector<double> circulations(const std::vector<const SpectralField*>& fields, const MaterialLoop& loop) {
  if (!loop.spacing_ok())
    throw ResolutionError("circulation: loop spacing invariant violated (max gap > 4 x mean gap)");
  const auto t = loop.tangents();
  const std::size_t P = loop.size();
  std::vector<double> out;
  out.reserve(fields.size());
  for (const SpectralField* f : fields) {
    require_vector(*f, "circulation");
    if (f->grid().dim() != loop.dim()) throw InvalidArgument("circulation: loop and field dimensions differ");
    const int d = loop.dim();
    auto v = evaluate_at_points(*f, loop.points());
    double s = 0.0;
    for (std::size_t j = 0; j < P; ++j)
      for (int a = 0; a < d; ++a) s += t[j][a] * v[j * d + a];
    out.push_back(s / static_cast<double>(P));
  }
  return out;
}

TimeSeries kelvin_residual(const FieldTrajectory& traj, const MaterialLoop& loop, const FlowEnsemble& loop_flow,
                           Flavor flavor) {
  if (loop_flow.flavor != flavor) throw InvalidArgument("kelvin_residual: flavor differs from the loop flow");
  if (loop_flow.particles() != loop.size()) throw InvalidArgument("kelvin_residual: loop and flow sizes differ");
  TimeSeries ts;
  ts.label = "kelvin_residual_" + to_string(flavor);
  ts.run_manifest_digest = traj.digest();
  const double c0 = circulation(traj.snapshots.front(), loop);
  for (std::size_t i = 0; i < loop_flow.times.size(); ++i) {
    const SpectralField& u = traj.snapshots[snapshot_index(traj, loop_flow.times[i])];
    ts.times.push_back(loop_flow.times[i]);
    ts.values.push_back(circulation(u, loop.moved(loop_flow.positions[i])) - c0);
  }
  return ts;
}

// ---------------------------------------------------------------------------

double CirculationDecomposition::max_closure() const { return max_abs_of(closure); }

namespace {

struct CirculationRates {
  SpectralField drift;      // G1 + G2
  SpectralField corrected;  // G1 + G2 - c
  std::vector<SpectralField> g;
};

CirculationRates circulation_rates(const Model& model, const SpectralField& u, Flavor flavor) {
  const TorusGrid& grid = model.grid();
  const int d = grid.dim();
  const NoiseBasis& basis = model.basis();
  CirculationRates r;
  SpectralField G1 = -model.drift_eval(u);
  if (!model.is_passive()) {
    Jet ju = make_jet(u);
    G1 += lie_transpose(ju, ju);
  }
  SpectralField G2(grid, d), c(grid, d);
  for (int k = 0; k < model.channels(); ++k) {
    const NoiseMember& m = basis.xi(k);
    const SpectralField sigma = model.noise_eval(u, k);
    const SpectralField Lu = lie_t(m, u);
    const SpectralField Lsigma = lie_t(m, sigma);
    if (flavor == Flavor::strat) {
      G2.axpy(0.5, lie_t(m, Lu));
    } else if (m.constant) {
      G2.axpy(0.5, constant_directional(constant_directional(u, m.value), m.value));
    } else {
      Jet ju = make_jet(u);
      G2.axpy(0.5, hessian_contraction(m.jet.f, ju));
      G2 += gradient_transpose_dot(m.jet, directional(m.jet, ju));
    }
    G2 -= Lsigma;
    SpectralField g = Lu - sigma;
    // M_k v = L^T_xi v - G_k v; c = 1/2 sum (L^T_xi M_k u - M_k G_k u)
    SpectralField Msigma = Lsigma - model.apply_noise_operator(k, sigma);
    c.axpy(0.5, lie_t(m, g));
    c.axpy(-0.5, Msigma);
    r.g.push_back(std::move(g));
  }
  r.drift = G1 + G2;
  r.corrected = r.drift - c;
  return r;
}

}  // namespace

CirculationDecomposition circulation_transport_decomposition(const Model& model, const FieldTrajectory& traj,
                                                             const MaterialLoop& loop, const FlowEnsemble& loop_flow,
                                                             Flavor flavor) {
  require_every_step(traj, loop_flow, "circulation_transport_decomposition");
  if (loop_flow.flavor != flavor)
    throw InvalidArgument("circulation_transport_decomposition: flavor differs from the loop flow");
  if (loop_flow.particles() != loop.size())
    throw InvalidArgument("circulation_transport_decomposition: loop and flow sizes differ");
  const bool heun = traj.scheme == Scheme::strat_heun;
  const int K = model.channels();
  const double dt = traj.dt;

  struct Level {
    double C = 0.0, drift = 0.0, corrected = 0.0;
    std::vector<double> g;
  };
  auto level = [&](long n) {
    CirculationRates r = circulation_rates(model, traj.snapshots[n], flavor);
    std::vector<const SpectralField*> fs{&traj.snapshots[n], &r.drift, &r.corrected};
    for (const auto& g : r.g) fs.push_back(&g);
    auto v = circulations(fs, loop.moved(loop_flow.positions[n]));
    Level L;
    L.C = v[0];
    L.drift = v[1];
    L.corrected = v[2];
    L.g.assign(v.begin() + 3, v.end());
    return L;
  };

  CirculationDecomposition out;
  out.flavor = flavor;
  Level prev = level(0);
  const double c0 = prev.C;
  double drift = 0.0, mart = 0.0;
  auto record = [&](double t, const Level& L) {
    out.times.push_back(t);
    out.measured.push_back(L.C - c0);
    out.drift.push_back(drift);
    out.martingale.push_back(mart);
    out.closure.push_back(L.C - c0 - drift - mart);
    out.drift_rate.push_back(L.drift);
    double gs = 0.0;
    for (double g : L.g) gs += g;
    out.noise_rate_sum.push_back(gs);
  };
  record(0.0, prev);
  for (long n = 0; n < traj.n_steps; ++n) {
    const auto dW = traj.driver.dW(n);
    Level next = level(n + 1);
    if (heun) {
      drift += 0.5 * (prev.corrected + next.corrected) * dt;
      for (int k = 0; k < K; ++k) mart += 0.5 * (prev.g[k] + next.g[k]) * dW[k];
    } else {
      drift += prev.drift * dt;
      for (int k = 0; k < K; ++k) mart += prev.g[k] * dW[k];
    }
    record(static_cast<double>(n + 1) * dt, next);
    prev = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// 1/2 |u|^2 plus the decomposition of its Ito differential for one state.
struct EnergyRates {
  double E = 0.0;
  double dissipation = 0.0;  // nu sum |P(eta.grad u)|^2
  double a = 0.0;            // noise-gradient drift group
  double b = 0.0;            // viscous group
  std::vector<double> m;     // martingale integrands
  double cov = 0.0;          // 1/2 sum d[m_k, W_k]/dt
};

EnergyRates energy_rates(const Model& model, const SpectralField& u) {
  EnergyRates r;
  r.E = 0.5 * inner_product(u, u);
  const NoiseBasis& basis = model.basis();
  const double nu = model.nu();
  if (nu > 0.0)
    for (const auto& e : basis.eta_members()) {
      SpectralField p = e.constant ? leray_project(constant_directional(u, e.value))
                                   : leray_project(directional(e.jet, make_jet(u)));
      r.dissipation += nu * inner_product(p, p);
    }
  if (model.circulation_family() && !model.spec().ito_flow_drift) {
    Jet ju = make_jet(u);
    for (int k = 0; k < model.channels(); ++k) {
      const NoiseMember& m = basis.xi(k);
      const SpectralField Lu = lie_t(m, u);
      if (!m.constant) {
        SpectralField q = leray_project(directional(ju, m.jet) + gradient_transpose_dot(m.jet, u));
        r.a += 0.5 * inner_product(q, Lu);
        r.m.push_back(-inner_product(u, gradient_transpose_dot(m.jet, u)));
      } else {
        r.m.push_back(0.0);
      }
    }
    if (nu > 0.0)
      for (const auto& e : basis.eta_members()) {
        if (e.constant) {
          const SpectralField du = constant_directional(u, e.value);
          r.b -= nu * inner_product(du, du);
        } else {
          r.b -= nu * inner_product(lie_transpose(e.jet, ju), lie_bracket(e.jet, ju));
        }
      }
  } else {
    // Generic Ito balance: -(u, f) + 1/2 sum |G_k u|^2 and martingale -(u, G_k u).
    r.a = -inner_product(u, model.drift_eval(u));
    for (int k = 0; k < model.channels(); ++k) {
      SpectralField s = model.noise_eval(u, k);
      r.a += 0.5 * inner_product(s, s);
      r.m.push_back(-inner_product(u, s));
    }
  }
  for (int k = 0; k < model.channels(); ++k) {
    SpectralField s = model.noise_eval(u, k);
    r.cov += 0.5 * (inner_product(s, s) + inner_product(u, model.apply_noise_operator(k, s)));
  }
  return r;
}

}  // namespace

double EnergyLedger::max_closure() const { return max_abs_of(closure); }

EnergyLedger energy_ledger(const Model& model, const FieldTrajectory& traj) {
  require_every_step(traj, "energy_ledger");
  const bool heun = traj.scheme == Scheme::strat_heun;
  const double dt = traj.dt;
  const int K = model.channels();
  EnergyLedger L;
  EnergyRates prev = energy_rates(model, traj.snapshots[0]);
  const double E0 = prev.E;
  double diss = 0.0, ga = 0.0, gb = 0.0, gm = 0.0;
  auto record = [&](double t, const EnergyRates& r) {
    L.times.push_back(t);
    L.energy.push_back(r.E);
    L.dissipation_integral.push_back(diss);
    L.drift_noise_group.push_back(ga);
    L.viscous_group.push_back(gb);
    L.martingale_group.push_back(gm);
    if (model.energy_family())
      L.closure.push_back(r.E + diss - E0);
    else
      L.closure.push_back(r.E - E0 - ga - gb - gm);
  };
  record(0.0, prev);
  for (long n = 0; n < traj.n_steps; ++n) {
    const auto dW = traj.driver.dW(n);
    EnergyRates next = energy_rates(model, traj.snapshots[n + 1]);
    diss += 0.5 * (prev.dissipation + next.dissipation) * dt;
    if (heun) {
      // Stratonovich-consistent trapezoid: the covariation correction goes with the drift.
      ga += 0.5 * ((prev.a - prev.cov) + (next.a - next.cov)) * dt;
      gb += 0.5 * (prev.b + next.b) * dt;
      for (int k = 0; k < K; ++k) gm += 0.5 * (prev.m[k] + next.m[k]) * dW[k];
    } else {
      ga += prev.a * dt;
      gb += prev.b * dt;
      for (int k = 0; k < K; ++k) gm += prev.m[k] * dW[k];
    }
    record(static_cast<double>(n + 1) * dt, next);
    prev = std::move(next);
  }
  return L;
}

// ---------------------------------------------------------------------------

double vorticity_flux(const SpectralField& u, const MaterialLoop& loop) {
  require_vector(u, "vorticity_flux");
  if (!loop.contractible())
    throw InvalidArgument("vorticity_flux: the loop does not bound a region (non-contractible)");
  if (loop.dim() != u.grid().dim()) throw InvalidArgument("vorticity_flux: loop and field dimensions differ");
  const TorusGrid& g = u.grid();
  if (g.dim() == 2) {
    const SpectralField w = curl(u);
    const double wbar = mean(w);
    // Velocity whose curl is the fluctuating vorticity: F = (d_y psi, -d_x psi), -lap psi = w - wbar.
    SpectralField psi = poisson_solve(w);
    SpectralField dpx = partial(psi, 0), dpy = partial(psi, 1);
    SpectralField F = SpectralField::stack({dpy, -dpx});
    return circulation(F, loop) + wbar * loop.signed_area();
  }
  // Cone S(r, s) = c + r (Gamma(s) - c); normal = r (Gamma - c) x Gamma'.
  const SpectralField w = curl(u);
  const auto& pts = loop.points();
  const auto tan = loop.tangents();
  const std::size_t P = pts.size();
  Point c{0.0, 0.0, 0.0};
  for (const auto& p : pts)
    for (int a = 0; a < 3; ++a) c[a] += p[a] / static_cast<double>(P);
  using Rule = boost::math::quadrature::gauss<double, 30>;
  double flux = 0.0;
  std::vector<Point> q(P);
  for (std::size_t i = 0; i < Rule::abscissa().size(); ++i) {
    const double x = Rule::abscissa()[i];
    const double wt = Rule::weights()[i];
    const int signs = x == 0.0 ? 1 : 2;
    for (int sgn = 0; sgn < signs; ++sgn) {
      const double xi = sgn == 0 ? x : -x;
      const double r = 0.5 * (xi + 1.0);
      for (std::size_t j = 0; j < P; ++j)
        for (int a = 0; a < 3; ++a) q[j][a] = c[a] + r * (pts[j][a] - c[a]);
      auto wv = evaluate_at_points(w, q);
      double s = 0.0;
      for (std::size_t j = 0; j < P; ++j) {
        const double dx = pts[j][0] - c[0], dy = pts[j][1] - c[1], dz = pts[j][2] - c[2];
        const double nx = dy * tan[j][2] - dz * tan[j][1];
        const double ny = dz * tan[j][0] - dx * tan[j][2];
        const double nz = dx * tan[j][1] - dy * tan[j][0];
        s += wv[3 * j] * nx + wv[3 * j + 1] * ny + wv[3 * j + 2] * nz;
      }
      flux += 0.5 * wt * r * s / static_cast<double>(P);
    }
  }
  return flux;
}

// ---------------------------------------------------------------------------

std::string to_string(WeberMode m) { return m == WeberMode::pullback ? "pullback" : "label_grid"; }

WeberMode weber_mode_from_string(const std::string& s) {
  if (s == "pullback") return WeberMode::pullback;
  if (s == "label_grid") return WeberMode::label_grid;
  throw InvalidArgument("unknown weber mode '" + s + "'");
}

WeberReport weber_pullback(const FieldTrajectory& traj, const FlowEnsemble& label_flow, int label_n,
                           const MaterialLoop* loop, const FlowEnsemble* loop_flow) {
  if (label_flow.defgrad.size() != label_flow.positions.size())
    throw PreconditionError("weber_residual: the label flow carries no deformation gradients");
  const SpectralField& u0 = traj.snapshots.front();
  const int d = u0.grid().dim();
  const TorusGrid lg(d, label_n);
  if (label_flow.particles() != lg.size())
    throw InvalidArgument("weber_residual: label flow does not match the label grid");
  const auto& labels = label_flow.positions.front();
  const auto u0_at = evaluate_at_points(u0, labels);
  const std::size_t N = lg.size();

  WeberReport rep;
  rep.mode = WeberMode::pullback;
  for (std::size_t i = 0; i < label_flow.times.size(); ++i) {
    const SpectralField& u = traj.snapshots[snapshot_index(traj, label_flow.times[i])];
    const auto ux = evaluate_at_points(u, label_flow.positions[i]);
    std::vector<double> r(N * d);
    for (std::size_t p = 0; p < N; ++p) {
      const Mat3& F = label_flow.defgrad[i][p];
      for (int c = 0; c < d; ++c) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += F[j * 3 + c] * ux[p * d + j];
        r[c * N + p] = s - u0_at[p * d + c];
      }
    }
    SpectralField rf = SpectralField::from_physical(lg, d, std::move(r));
    const double nr = norm_l2(rf);
    rep.times.push_back(label_flow.times[i]);
    rep.residual.push_back(nr > 0.0 ? norm_l2(curl(rf)) / nr : 0.0);
  }

  if (loop && loop_flow) {
    if (loop_flow->defgrad.size() != loop_flow->positions.size())
      throw PreconditionError("weber_residual: the loop flow carries no deformation gradients");
    const auto tan = loop->tangents();
    const std::size_t P = loop->size();
    const double c0 = circulation(u0, *loop);
    for (std::size_t i = 0; i < loop_flow->times.size(); ++i) {
      const SpectralField& u = traj.snapshots[snapshot_index(traj, loop_flow->times[i])];
      const auto ux = evaluate_at_points(u, loop_flow->positions[i]);
      double s = 0.0;
      for (std::size_t j = 0; j < P; ++j) {
        const Mat3& F = loop_flow->defgrad[i][j];
        for (int a = 0; a < d; ++a) {
          double ft = 0.0;
          for (int b = 0; b < d; ++b) ft += F[a * 3 + b] * tan[j][b];
          s += ft * ux[j * d + a];
        }
      }
      rep.loop_mismatch.push_back(std::abs(s / static_cast<double>(P) - c0));
    }
  }
  return rep;
}

SpectralField weber_reconstruction(const SpectralField& u0, const SpectralField& a) {
  require_same_grid(u0, a, "weber_reconstruction");
  require_vector(a, "weber_reconstruction");
  const TorusGrid& g = a.grid();
  const int d = g.dim();
  const std::size_t N = g.size();
  std::vector<Point> A(N);
  for (std::size_t p = 0; p < N; ++p) {
    A[p] = g.node(p);
    for (int c = 0; c < d; ++c) A[p][c] += a.physical(c)[p];
  }
  const auto uA = evaluate_at_points(u0, A);
  std::vector<SpectralField> da;
  for (int j = 0; j < d; ++j) da.push_back(partial(a, j));
  std::vector<double> w(N * d);
  for (int i = 0; i < d; ++i)
    for (std::size_t p = 0; p < N; ++p) {
      double s = uA[p * d + i];
      for (int j = 0; j < d; ++j) s += da[i].physical(j)[p] * uA[p * d + j];  // d_i a_j u0_j(A)
      w[i * N + p] = s;
    }
  return dealias(leray_project(SpectralField::from_physical(g, d, std::move(w))));
}

WeberReport weber_label_grid(const FieldTrajectory& traj, const LabelTrajectory& labels) {
  WeberReport rep;
  rep.mode = WeberMode::label_grid;
  const SpectralField& u0 = traj.snapshots.front();
  for (std::size_t i = 0; i < labels.times.size(); ++i) {
    const SpectralField& u = traj.snapshots[snapshot_index(traj, labels.times[i])];
    const SpectralField rec = weber_reconstruction(u0, labels.a[i]);
    const double nu = norm_l2(u);
    rep.times.push_back(labels.times[i]);
    rep.residual.push_back(nu > 0.0 ? norm_l2(rec - u) / nu : norm_l2(rec - u));
  }
  return rep;
}

TimeSeries cauchy_residual(const FieldTrajectory& traj, const FlowEnsemble& flow) {
  const SpectralField& u0 = traj.snapshots.front();
  const int d = u0.grid().dim();
  if (d == 3 && flow.defgrad.size() != flow.positions.size())
    throw PreconditionError("cauchy_residual: 3D needs deformation gradients");
  const SpectralField w0 = curl(u0);
  const int C = w0.components();
  const auto w0a = evaluate_at_points(w0, flow.positions.front());
  const double scale = std::max(max_abs(w0), 1e-300);
  TimeSeries ts;
  ts.label = "cauchy_residual";
  ts.run_manifest_digest = traj.digest();
  for (std::size_t i = 0; i < flow.times.size(); ++i) {
    const SpectralField w = curl(traj.snapshots[snapshot_index(traj, flow.times[i])]);
    const auto wx = evaluate_at_points(w, flow.positions[i]);
    double worst = 0.0;
    for (std::size_t p = 0; p < flow.particles(); ++p) {
      if (C == 1) {
        worst = std::max(worst, std::abs(wx[p] - w0a[p]));
        continue;
      }
      const Mat3& F = flow.defgrad[i][p];
      double e2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        double fw = 0.0;
        for (int b = 0; b < 3; ++b) fw += F[a * 3 + b] * w0a[p * 3 + b];
        e2 += (wx[p * 3 + a] - fw) * (wx[p * 3 + a] - fw);
      }
      worst = std::max(worst, std::sqrt(e2));
    }
    ts.times.push_back(flow.times[i]);
    ts.values.push_back(worst / scale);
  }
  return ts;
}

double helicity(const SpectralField& u) {
  require_vector(u, "helicity");
  if (u.grid().dim() != 3) throw InvalidArgument("helicity: unsupported dimension (3D only)");
  return inner_product(u, curl(u));
}

double magnetic_helicity(const SpectralField& A, const SpectralField& B) {
  require_same_grid(A, B, "magnetic_helicity");
  require_vector(A, "magnetic_helicity");
  require_vector(B, "magnetic_helicity");
  if (A.grid().dim() != 3) throw InvalidArgument("magnetic_helicity: unsupported dimension (3D only)");
  return inner_product(A, B);
}

void write_series_csv(const std::string& path, const std::vector<double>& times,
                      const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw InvalidArgument("write_series_csv: names and columns differ");
  for (const auto& c : columns)
    if (c.size() != times.size()) throw InvalidArgument("write_series_csv: column length differs from times");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("write_series_csv: cannot open " + path);
  os << "t";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < times.size(); ++i) {
    os << format_double(times[i]);
    for (const auto& c : columns) os << ',' << format_double(c[i]);
    os << '\n';
  }
}

}  // namespace kelvinlab
