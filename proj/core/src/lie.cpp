#include "kelvinlab/lie.hpp"

#include <cmath>

#include "kelvinlab/error.hpp"

namespace kelvinlab {

Jet make_jet(const SpectralField& f) {
  Jet j;
  j.f = f;
  j.d.reserve(f.grid().dim());
  for (int a = 0; a < f.grid().dim(); ++a) j.d.push_back(partial(f, a));
  return j;
}

namespace {

void check_pair(const SpectralField& a, const SpectralField& b, const char* op) {
  require_same_grid(a, b, op);
  require_vector(a, op);
}

}  // namespace

SpectralField directional(const Jet& xi, const Jet& u) {
  check_pair(xi.f, u.f, "directional");
  const TorusGrid& g = u.f.grid();
  const std::size_t n = g.size();
  const int d = g.dim();
  const int C = u.f.components();
  std::vector<double> out(n * C, 0.0);
  for (int c = 0; c < C; ++c)
    for (int j = 0; j < d; ++j) {
      auto x = xi.f.physical(j);
      auto du = u.d[j].physical(c);
      double* o = out.data() + c * n;
      for (std::size_t i = 0; i < n; ++i) o[i] += x[i] * du[i];
    }
  return dealiased_from_physical(g, C, std::move(out));
}

SpectralField directional(const SpectralField& xi, const SpectralField& u) {
  return directional(Jet{xi, {}}, make_jet(u));
}

SpectralField gradient_transpose_dot(const Jet& xi, const SpectralField& u) {
  check_pair(xi.f, u, "gradient_transpose_dot");
  require_vector(u, "gradient_transpose_dot");
  const TorusGrid& g = u.grid();
  const std::size_t n = g.size();
  const int d = g.dim();
  std::vector<double> out(n * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      auto dx = xi.d[i].physical(j);
      auto uj = u.physical(j);
      double* o = out.data() + i * n;
      for (std::size_t p = 0; p < n; ++p) o[p] += dx[p] * uj[p];
    }
  return dealiased_from_physical(g, d, std::move(out));
}

SpectralField lie_bracket(const Jet& xi, const Jet& w) {
  check_pair(xi.f, w.f, "lie_bracket");
  require_vector(w.f, "lie_bracket");
  const TorusGrid& g = w.f.grid();
  const std::size_t n = g.size();
  const int d = g.dim();
  std::vector<double> out(n * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      auto xj = xi.f.physical(j);
      auto wj = w.f.physical(j);
      auto dw = w.d[j].physical(i);
      auto dx = xi.d[j].physical(i);
      double* o = out.data() + i * n;
      for (std::size_t p = 0; p < n; ++p) o[p] += xj[p] * dw[p] - wj[p] * dx[p];
    }
  return dealiased_from_physical(g, d, std::move(out));
}

SpectralField lie_bracket(const SpectralField& xi, const SpectralField& w) {
  check_pair(xi, w, "lie_bracket");
  return lie_bracket(make_jet(xi), make_jet(w));
}

SpectralField lie_transpose(const Jet& xi, const Jet& u) {
  check_pair(xi.f, u.f, "lie_transpose");
  require_vector(u.f, "lie_transpose");
  const TorusGrid& g = u.f.grid();
  const std::size_t n = g.size();
  const int d = g.dim();
  std::vector<double> out(n * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      auto xj = xi.f.physical(j);
      auto uj = u.f.physical(j);
      auto du = u.d[j].physical(i);  // d_j u_i
      auto dx = xi.d[i].physical(j);  // d_i xi_j
      double* o = out.data() + i * n;
      for (std::size_t p = 0; p < n; ++p) o[p] += xj[p] * du[p] + dx[p] * uj[p];
    }
  return dealiased_from_physical(g, d, std::move(out));
}

SpectralField lie_transpose(const SpectralField& xi, const SpectralField& u) {
  check_pair(xi, u, "lie_transpose");
  return lie_transpose(make_jet(xi), make_jet(u));
}

SpectralField cross(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b, "cross");
  if (a.grid().dim() != 3 || !a.is_vector() || !b.is_vector()) throw InvalidArgument("cross: 3D vectors required");
  const std::size_t n = a.grid().size();
  std::vector<double> out(3 * n);
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    auto aj = a.physical(j), ak = a.physical(k), bj = b.physical(j), bk = b.physical(k);
    for (std::size_t p = 0; p < n; ++p) out[i * n + p] = aj[p] * bk[p] - ak[p] * bj[p];
  }
  return dealiased_from_physical(a.grid(), 3, std::move(out));
}

SpectralField dot(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b, "dot");
  if (a.components() != b.components()) throw InvalidArgument("dot: rank mismatch");
  const std::size_t n = a.grid().size();
  std::vector<double> out(n, 0.0);
  for (int c = 0; c < a.components(); ++c) {
    auto x = a.physical(c), y = b.physical(c);
    for (std::size_t p = 0; p < n; ++p) out[p] += x[p] * y[p];
  }
  return dealiased_from_physical(a.grid(), 1, std::move(out));
}

SpectralField hessian_contraction(const SpectralField& xi, const Jet& u) {
  const TorusGrid& g = u.f.grid();
  const std::size_t n = g.size();
  const int d = g.dim();
  std::vector<double> out(n * d, 0.0);
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      SpectralField h = partial(u.d[j], k);
      const double mult = j == k ? 1.0 : 2.0;
      auto xj = xi.physical(j), xk = xi.physical(k);
      for (int i = 0; i < d; ++i) {
        auto hi = h.physical(i);
        double* o = out.data() + i * n;
        for (std::size_t p = 0; p < n; ++p) o[p] += mult * xj[p] * xk[p] * hi[p];
      }
    }
  return dealiased_from_physical(g, d, std::move(out));
}

SpectralField double_lie_transpose(const SpectralField& xi, const SpectralField& u, DoubleLieMode mode) {
  check_pair(xi, u, "double_lie_transpose");
  require_vector(u, "double_lie_transpose");
  switch (mode) {
    case DoubleLieMode::composed: {
      Jet xj = make_jet(xi);
      SpectralField w = lie_transpose(xj, make_jet(u));
      return lie_transpose(xj, make_jet(w));
    }
    case DoubleLieMode::expanded: {
      Jet xj = make_jet(xi);
      Jet uj = make_jet(u);
      Jet a = make_jet(directional(xj, xj));  // (xi.grad) xi
      SpectralField out = directional(a, uj);
      out += hessian_contraction(xi, uj);
      out += 2.0 * gradient_transpose_dot(xj, directional(xj, uj));
      out += gradient_transpose_dot(a, u);
      return out;
    }
    case DoubleLieMode::cross3d: {
      if (u.grid().dim() != 3) throw InvalidArgument("double_lie_transpose: cross3d mode requires d = 3");
      SpectralField out = cross(xi, curl(cross(xi, curl(u))));
      out += gradient(directional(xi, dot(xi, u)));
      return out;
    }
  }
  throw InvalidArgument("double_lie_transpose: unknown mode");
}

double adjoint_pairing_residual(const SpectralField& xi, const SpectralField& v, const SpectralField& w) {
  check_pair(xi, v, "adjoint_pairing_residual");
  check_pair(xi, w, "adjoint_pairing_residual");
  if (divergence_ratio(w) > 1e-8) throw PreconditionError("adjoint_pairing_residual: w is not solenoidal");
  if (divergence_ratio(xi) > 1e-8) throw PreconditionError("adjoint_pairing_residual: xi is not solenoidal");
  const double nv = norm_l2(v), nw = norm_l2(w);
  if (nv == 0.0 || nw == 0.0) return 0.0;
  const double lhs = inner_product(lie_transpose(xi, v), w);
  const double rhs = inner_product(v, lie_bracket(xi, w));
  return std::abs(lhs + rhs) / (nv * nw);
}

namespace {

double rel(double num, double den) { return den > 0.0 ? num / den : num; }

}  // namespace

std::vector<OperatorReport> operator_identity_suite(const TorusGrid& g, std::uint64_t seed) {
  const int d = g.dim();
  // Cubic products of fields with |k| <= kf stay inside the band.
  const int kf = std::max(1, g.kmax() / 3);
  const std::string gname = g.describe();
  std::vector<OperatorReport> out;
  auto add = [&](const std::string& name, double r) { out.push_back({name, r, gname, seed}); };

  SpectralField v = random_field(g, d, seed, kf);
  SpectralField w = random_field(g, d, seed + 1, kf, true);
  SpectralField xi = random_field(g, d, seed + 2, kf, true);
  SpectralField q = random_field(g, 1, seed + 3, kf);
  SpectralField u = random_field(g, d, seed + 4, kf, true);

  SpectralField pv = leray_project(v);
  add("leray_idempotent", rel(norm_l2(leray_project(pv) - pv), norm_l2(pv)));
  SpectralField gq = gradient(q);
  add("leray_annihilates_gradient", rel(norm_l2(leray_project(gq)), norm_l2(gq)));
  add("leray_divergence_free", rel(norm_l2(divergence(pv)), norm_l2(v)));
  add("leray_self_adjoint", rel(std::abs(inner_product(pv, w) - inner_product(v, w)), norm_l2(v) * norm_l2(w)));
  {
    SpectralField rest = v - pv;
    add("leray_complement_is_gradient", rel(norm_l2(curl(rest)), norm_l2(v)));
  }
  add("parseval", rel(std::abs(inner_product(v, w) - spectral_inner_product(v, w)), norm_l2(v) * norm_l2(w)));
  add("adjoint_pairing", adjoint_pairing_residual(xi, v, w));
  add("adjoint_pairing_symmetric", adjoint_pairing_residual(xi, xi, xi));
  {
    SpectralField a = double_lie_transpose(xi, u, DoubleLieMode::composed);
    SpectralField b = double_lie_transpose(xi, u, DoubleLieMode::expanded);
    add("double_lie_expansion", rel(norm_l2(a - b), norm_l2(a)));
    if (d == 3) {
      SpectralField c = double_lie_transpose(xi, u, DoubleLieMode::cross3d);
      add("double_lie_cross_gradient", rel(norm_l2(curl(a - c)), norm_l2(u)));
    }
  }
  {
    // non-solenoidal probe is allowed here
    SpectralField probe = random_field(g, d, seed + 5, kf);
    SpectralField t = lie_transpose(probe, gq);
    add("lie_transpose_of_gradient", rel(norm_l2(curl(t)), norm_l2(t)));
  }
  {
    SpectralField lhs = leray_project(lie_transpose(xi, pv));
    SpectralField rhs = leray_project(lie_transpose(xi, v));
    add("projection_commutes", rel(norm_l2(lhs - rhs), norm_l2(rhs)));
  }
  {
    SpectralField b1 = lie_bracket(xi, w);
    SpectralField b2 = lie_bracket(w, xi);
    add("bracket_antisymmetry", rel(norm_l2(b1 + b2), norm_l2(b1)));
  }
  if (d == 3) {
    SpectralField t = lie_transpose(xi, u);
    SpectralField s = t + cross(xi, curl(u));
    add("lie_transpose_cross_form", rel(norm_l2(curl(s)), norm_l2(t)));
  }
  return out;
}

}  // namespace kelvinlab
