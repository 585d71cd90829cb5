#include "kelvinlab/model.hpp"

#include "kelvinlab/error.hpp"

namespace kelvinlab {

std::string to_string(Family f) {
  switch (f) {
    case Family::euler_poincare: return "euler_poincare";
    case Family::energy_euler: return "energy_euler";
    case Family::ns_poincare: return "ns_poincare";
    case Family::energy_ns: return "energy_ns";
    case Family::passive_transport: return "passive_transport";
  }
  return "unknown";
}

std::string to_string(PassiveKind k) { return k == PassiveKind::oneform ? "oneform" : "vectorfield"; }

Family family_from_string(const std::string& s) {
  if (s == "euler_poincare") return Family::euler_poincare;
  if (s == "energy_euler") return Family::energy_euler;
  if (s == "ns_poincare") return Family::ns_poincare;
  if (s == "energy_ns") return Family::energy_ns;
  if (s == "passive_transport") return Family::passive_transport;
  throw InvalidArgument("unknown model family '" + s + "'");
}

PassiveKind passive_kind_from_string(const std::string& s) {
  if (s == "oneform") return PassiveKind::oneform;
  if (s == "vectorfield") return PassiveKind::vectorfield;
  throw InvalidArgument("unknown passive kind '" + s + "'");
}

SpectralField constant_directional(const SpectralField& u, const Point& c) {
  const TorusGrid& g = u.grid();
  const std::size_t ns = g.spectral_size();
  const int C = u.components();
  std::vector<cplx> out(ns * C);
  for (std::size_t s = 0; s < ns; ++s) {
    if (g.is_nyquist(s)) continue;
    const auto k = g.wavevector(s);
    double kc = 0.0;
    for (int a = 0; a < g.dim(); ++a) kc += k[a] * c[a];
    const cplx sym(0.0, kc);
    for (int q = 0; q < C; ++q) out[q * ns + s] = sym * u.spectral()[q * ns + s];
  }
  return SpectralField::from_spectral(g, C, std::move(out));
}

Model::Model(ModelSpec spec, std::shared_ptr<const NoiseBasis> basis) : spec_(spec), basis_(std::move(basis)) {
  if (!basis_) throw InvalidArgument("Model: basis required");
  if (spec_.nu < 0.0) throw ValidationError("Model: nu must be non-negative");
}

Model::Model(ModelSpec spec, NoiseBasis basis) : Model(spec, std::make_shared<const NoiseBasis>(std::move(basis))) {}

double Model::nu() const { return viscous() ? spec_.nu : 0.0; }

SpectralField Model::noise_op(int k, const Jet& v, bool project) const {
  const NoiseMember& m = basis_->xi(k);
  SpectralField r;
  if (m.constant) {
    r = constant_directional(v.f, m.value);
  } else if (energy_family()) {
    r = directional(m.jet, v);
  } else if (is_passive() && spec_.passive_kind == PassiveKind::vectorfield) {
    r = lie_bracket(m.jet, v);
  } else {
    r = lie_transpose(m.jet, v);
  }
  return project ? leray_project(r) : r;
}

SpectralField Model::noise_op(int k, const SpectralField& v, bool project) const {
  const NoiseMember& m = basis_->xi(k);
  if (m.constant) {
    SpectralField r = constant_directional(v, m.value);
    return project ? leray_project(r) : r;
  }
  return noise_op(k, make_jet(v), project);
}

SpectralField Model::apply_noise_operator(int k, const SpectralField& v) const { return noise_op(k, v, true); }

SpectralField Model::correction(const Jet& u, const std::vector<SpectralField>* g) const {
  SpectralField acc(grid(), grid().dim());
  for (int k = 0; k < channels(); ++k) {
    // Compose the projected noise operators so the Ito form is the exact conversion of the discrete
    // Stratonovich system; the unprojected inner term only agrees up to truncation error.
    const SpectralField inner = g ? (*g)[k] : noise_op(k, u, true);
    acc += noise_op(k, inner, true);
  }
  return acc;
}

SpectralField Model::viscous_drift(const SpectralField& u) const {
  const TorusGrid& g = grid();
  SpectralField acc(g, g.dim());
  if (!viscous()) return acc;
  const double nu = spec_.nu;
  for (const auto& m : basis_->eta_members()) {
    if (m.constant) {
      acc.axpy(-nu, constant_directional(constant_directional(u, m.value), m.value));
    } else if (energy_family()) {
      SpectralField inner = leray_project(directional(m.jet, make_jet(u)));
      acc.axpy(-nu, directional(m.jet, make_jet(inner)));
    } else {
      SpectralField inner = lie_transpose(m.jet, make_jet(u));
      acc.axpy(-nu, lie_transpose(m.jet, make_jet(inner)));
    }
  }
  return leray_project(acc);
}

SpectralField Model::strat_drift(const Jet& u) const {
  const TorusGrid& g = grid();
  SpectralField F(g, g.dim());
  switch (spec_.family) {
    case Family::euler_poincare:
    case Family::ns_poincare:
      F = lie_transpose(u, u);
      if (spec_.ito_flow_drift && channels() > 0) F -= lie_transpose(make_jet(basis_->induced_drift()), u);
      break;
    case Family::energy_euler:
    case Family::energy_ns:
      F = directional(u, u);
      break;
    case Family::passive_transport:
      break;
  }
  F = leray_project(F);
  if (viscous()) F += viscous_drift(u.f);
  return F;
}

SpectralField Model::strat_drift(const SpectralField& u) const { return strat_drift(make_jet(u)); }

Tendencies Model::stratonovich(const SpectralField& u) const {
  Jet j = make_jet(u);
  Tendencies t;
  t.drift = strat_drift(j);
  t.noise.reserve(channels());
  for (int k = 0; k < channels(); ++k) t.noise.push_back(noise_op(k, j, true));
  return t;
}

Tendencies Model::ito(const SpectralField& u) const {
  Jet j = make_jet(u);
  Tendencies t;
  t.noise.reserve(channels());
  for (int k = 0; k < channels(); ++k) t.noise.push_back(noise_op(k, j, true));
  t.drift = strat_drift(j);
  if (channels() > 0) t.drift.axpy(-0.5, correction(j, &t.noise));
  return t;
}

SpectralField Model::drift_eval(const SpectralField& u) const {
  require_vector(u, "drift_eval");
  if (divergence_ratio(u) > 1e-6) throw PreconditionError("drift_eval: state is not solenoidal");
  Jet j = make_jet(u);
  SpectralField f = strat_drift(j);
  if (channels() > 0) f.axpy(-0.5, correction(j, nullptr));
  return f;
}

SpectralField Model::noise_eval(const SpectralField& u, int k) const {
  if (k < 0 || k >= channels()) throw InvalidArgument("noise_eval: channel out of range");
  return noise_op(k, u, true);
}

}  // namespace kelvinlab
