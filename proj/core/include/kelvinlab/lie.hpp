#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kelvinlab/grid.hpp"

namespace kelvinlab {

/// A field together with its first partial derivatives: d[j] = df/dx_j.
struct Jet {
  SpectralField f;
  std::vector<SpectralField> d;
};

Jet make_jet(const SpectralField& f);

/// (xi . grad) u for scalar or vector u, dealiased.
SpectralField directional(const SpectralField& xi, const SpectralField& u);
SpectralField directional(const Jet& xi, const Jet& u);

/// i-th component: (d_i xi_j) u_j, dealiased.
SpectralField gradient_transpose_dot(const Jet& xi, const SpectralField& u);

/// [xi, w] = xi.grad w - w.grad xi
SpectralField lie_bracket(const SpectralField& xi, const SpectralField& w);
SpectralField lie_bracket(const Jet& xi, const Jet& w);

/// (L^T_xi u)_i = xi^j d_j u_i + (d_i xi^j) u_j
SpectralField lie_transpose(const SpectralField& xi, const SpectralField& u);
SpectralField lie_transpose(const Jet& xi, const Jet& u);

/// (xi xi):(grad grad) u, i.e. xi_j xi_k d_j d_k u_i, dealiased.
SpectralField hessian_contraction(const SpectralField& xi, const Jet& u);

enum class DoubleLieMode { composed, expanded, cross3d };

SpectralField double_lie_transpose(const SpectralField& xi, const SpectralField& u, DoubleLieMode mode);

/// 3D cross product of two vector fields, dealiased.
SpectralField cross(const SpectralField& a, const SpectralField& b);
/// Pointwise dot product, dealiased scalar.
SpectralField dot(const SpectralField& a, const SpectralField& b);

/// |(L^T_xi v, w) + <v, [xi, w]>| / (|v| |w|). Both xi and w must be solenoidal.
double adjoint_pairing_residual(const SpectralField& xi, const SpectralField& v, const SpectralField& w);

struct OperatorReport {
  std::string identity_name;
  double residual_l2 = 0.0;
  std::string grid;
  std::uint64_t field_seed = 0;
};

/// Runs the full operator identity suite on seeded random fields.
/// Field bandwidth is chosen so every cubic product is resolved exactly.
std::vector<OperatorReport> operator_identity_suite(const TorusGrid& g, std::uint64_t seed);

}  // namespace kelvinlab
