#include "kelvinlab/integrator.hpp"

#include <cmath>

#include "kelvinlab/error.hpp"
#include "kelvinlab/field_io.hpp"

namespace kelvinlab {

std::string to_string(Scheme s) { return s == Scheme::strat_heun ? "strat_heun" : "ito_em"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "strat_heun") return Scheme::strat_heun;
  if (s == "ito_em") return Scheme::ito_em;
  throw InvalidArgument("unknown scheme '" + s + "'");
}

std::string FieldTrajectory::digest() const {
  std::string s;
  for (std::size_t i = 0; i < snapshots.size(); ++i) s += field_digest(snapshots[i]) + format_double(times[i]);
  return sha256_hex(s);
}

long step_count(double T, double dt) {
  if (!(dt > 0.0) || T < 0.0) throw InvalidArgument("step_count: need dt > 0 and T >= 0");
  const double r = T / dt;
  const long n = std::lround(r);
  if (std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r))
    throw InvalidArgument("T/dt must be an integer");
  return n;
}

namespace {

void check_stability(const Model& model, const SpectralField& u, double dt, long step) {
  const double h = u.grid().spacing();
  if (!model.is_passive()) {
    const double umax = max_abs(u);
    if (!std::isfinite(umax))
      throw StabilityError("non-finite state at step " + std::to_string(step), step);
    if (umax * dt > kCflLimit * h)
      throw StabilityError("CFL limit exceeded at step " + std::to_string(step) + " (max|u| dt / h = " +
                               std::to_string(umax * dt / h) + ")",
                           step);
  }
  if (model.viscous()) {
    const double kmax = u.grid().kmax();
    double eta2 = 0.0;
    for (const auto& m : model.basis().eta_members()) eta2 += std::pow(max_abs(m.jet.f), 2);
    if (model.spec().nu * eta2 * dt * kmax * kmax > 1.0)
      throw StabilityError("viscous step limit exceeded at step " + std::to_string(step), step);
  }
}

void check_finite(const SpectralField& u, long step) {
  for (double v : u.physical())
    if (!std::isfinite(v)) throw StabilityError("NaN or Inf produced at step " + std::to_string(step), step);
}

}  // namespace

SpectralField advance(const Model& model, const SpectralField& state, double dt, std::span<const double> dW,
                      Scheme scheme, long step_index) {
  if (static_cast<int>(dW.size()) != model.channels())
    throw InvalidArgument("advance: dW length must equal the number of noise channels");
  check_stability(model, state, dt, step_index);
  const int K = model.channels();
  SpectralField next = state;
  if (scheme == Scheme::ito_em) {
    Tendencies t = model.ito(state);
    next.axpy(-dt, t.drift);
    for (int k = 0; k < K; ++k) next.axpy(-dW[k], t.noise[k]);
  } else {
    Tendencies t0 = model.stratonovich(state);
    SpectralField pred = state;
    pred.axpy(-dt, t0.drift);
    for (int k = 0; k < K; ++k) pred.axpy(-dW[k], t0.noise[k]);
    check_finite(pred, step_index);
    Tendencies t1 = model.stratonovich(pred);
    next.axpy(-0.5 * dt, t0.drift);
    next.axpy(-0.5 * dt, t1.drift);
    for (int k = 0; k < K; ++k) {
      next.axpy(-0.5 * dW[k], t0.noise[k]);
      next.axpy(-0.5 * dW[k], t1.noise[k]);
    }
  }
  next = leray_project(next);
  check_finite(next, step_index);
  return next;
}

FieldTrajectory run(const Model& model, const SpectralField& u0, double T, double dt, const BrownianDriver& driver,
                    Scheme scheme, int save_stride) {
  require_vector(u0, "run");
  if (save_stride < 1) throw InvalidArgument("run: save_stride must be >= 1");
  const long N = step_count(T, dt);
  if (std::abs(driver.dt() - dt) > 1e-12 * dt) throw InvalidArgument("run: driver time step differs from dt");
  if (driver.n_steps() < N) throw InvalidArgument("run: driver is shorter than the run");
  if (driver.channels_w() != model.channels())
    throw InvalidArgument("run: driver W channel count differs from the basis size");
  if (divergence_ratio(u0) > 1e-6) throw PreconditionError("run: initial field is not solenoidal");

  FieldTrajectory tr;
  tr.save_stride = save_stride;
  tr.dt = dt;
  tr.n_steps = N;
  tr.scheme = scheme;
  tr.driver = driver;
  tr.model = model.spec();
  tr.times.push_back(0.0);
  tr.steps.push_back(0);
  tr.snapshots.push_back(u0);

  SpectralField u = u0;
  std::vector<double> dW(driver.channels_w()), dB(driver.channels_b());
  for (long n = 0; n < N; ++n) {
    driver.sample_increments(n, dW.data(), dB.data());
    u = advance(model, u, dt, dW, scheme, n);
    if ((n + 1) % save_stride == 0 || n + 1 == N) {
      tr.times.push_back(static_cast<double>(n + 1) * dt);
      tr.steps.push_back(n + 1);
      tr.snapshots.push_back(u);
    }
  }
  return tr;
}

}  // namespace kelvinlab
