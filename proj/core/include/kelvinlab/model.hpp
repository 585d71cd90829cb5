#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kelvinlab/grid.hpp"
#include "kelvinlab/lie.hpp"
#include "kelvinlab/noise.hpp"

namespace kelvinlab {

enum class Family { euler_poincare, energy_euler, ns_poincare, energy_ns, passive_transport };
enum class PassiveKind { oneform, vectorfield };

std::string to_string(Family f);
std::string to_string(PassiveKind k);
Family family_from_string(const std::string& s);
PassiveKind passive_kind_from_string(const std::string& s);

struct ModelSpec {
  Family family = Family::euler_poincare;
  double nu = 0.0;
  PassiveKind passive_kind = PassiveKind::oneform;
  /// Circulation families only: use the drift whose Kelvin theorem holds along
  /// the Ito flow dY = u dt + xi dW instead of the Stratonovich flow.
  bool ito_flow_drift = false;
};

struct Tendencies {
  SpectralField drift;
  std::vector<SpectralField> noise;
};

/// Drift and noise assembly for one model family, written for
/// du + P f dt + sum_k P sigma_k dW_k = 0 (Ito) or
/// du + P F dt + sum_k G_k u o dW_k = 0 (Stratonovich), G_k u = P sigma_k.
class Model {
 public:
  Model(ModelSpec spec, std::shared_ptr<const NoiseBasis> basis);
  Model(ModelSpec spec, NoiseBasis basis);

  const ModelSpec& spec() const { return spec_; }
  const NoiseBasis& basis() const { return *basis_; }
  std::shared_ptr<const NoiseBasis> basis_ptr() const { return basis_; }
  const TorusGrid& grid() const { return basis_->grid(); }
  int channels() const { return basis_->size_w(); }
  double nu() const;
  bool is_passive() const { return spec_.family == Family::passive_transport; }
  bool circulation_family() const {
    return spec_.family == Family::euler_poincare || spec_.family == Family::ns_poincare;
  }
  bool energy_family() const { return spec_.family == Family::energy_euler || spec_.family == Family::energy_ns; }
  bool viscous() const {
    return (spec_.family == Family::ns_poincare || spec_.family == Family::energy_ns) && spec_.nu > 0.0;
  }

  /// Projected Ito drift P f. Requires solenoidal u.
  SpectralField drift_eval(const SpectralField& u) const;
  /// Projected noise P sigma_k.
  SpectralField noise_eval(const SpectralField& u, int k) const;

  /// Projected Stratonovich drift F.
  SpectralField strat_drift(const SpectralField& u) const;
  Tendencies stratonovich(const SpectralField& u) const;
  Tendencies ito(const SpectralField& u) const;

  /// G_k applied to an arbitrary field (projected).
  SpectralField apply_noise_operator(int k, const SpectralField& v) const;
  /// Viscous part of the Stratonovich drift: -nu sum L^T_eta L^T_eta u (circulation
  /// families) or -nu sum P eta.grad P(eta.grad u) (energy families), projected.
  SpectralField viscous_drift(const SpectralField& u) const;

 private:
  SpectralField strat_drift(const Jet& u) const;
  SpectralField noise_op(int k, const Jet& v, bool project) const;
  SpectralField noise_op(int k, const SpectralField& v, bool project) const;
  SpectralField correction(const Jet& u, const std::vector<SpectralField>* g) const;

  ModelSpec spec_;
  std::shared_ptr<const NoiseBasis> basis_;
};

/// Multiply by the Fourier symbol i(c.k): the exact directional derivative for constant c.
SpectralField constant_directional(const SpectralField& u, const Point& c);

}  // namespace kelvinlab
