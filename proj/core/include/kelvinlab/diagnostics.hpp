#pragma once

#include <string>
#include <vector>

#include "kelvinlab/grid.hpp"
#include "kelvinlab/integrator.hpp"
#include "kelvinlab/lagrangian.hpp"
#include "kelvinlab/model.hpp"

namespace kelvinlab {

struct TimeSeries {
  std::string label;
  std::vector<double> times;
  std::vector<double> values;
  std::string run_manifest_digest;

  double final() const { return values.empty() ? 0.0 : values.back(); }
  double max_abs() const;
};

/// Closed-loop integral of u . dl: (1/P) sum_j Gamma'(s_j) . u(Gamma(s_j)).
/// Throws ResolutionError when the loop spacing invariant is violated.
double circulation(const SpectralField& u, const MaterialLoop& loop);

/// Loop integrals of several fields around the same loop (one pass of tangents).
std::vector<double> circulations(const std::vector<const SpectralField*>& fields, const MaterialLoop& loop);

/// C_t - C_0 at every stored time of the loop flow.
TimeSeries kelvin_residual(const FieldTrajectory& traj, const MaterialLoop& loop, const FlowEnsemble& loop_flow,
                           Flavor flavor);

struct CirculationDecomposition {
  Flavor flavor = Flavor::strat;
  std::vector<double> times;
  std::vector<double> measured;        // C_t - C_0
  std::vector<double> drift;           // accumulated dt-terms (including the covariation correction for Heun)
  std::vector<double> martingale;      // accumulated dW-terms
  std::vector<double> drift_rate;      // drift loop integrals G1 + G2 at t_n
  std::vector<double> noise_rate_sum;  // sum_k g_k at t_n
  std::vector<double> closure;         // measured - drift - martingale

  double max_closure() const;
};

/// Accumulates the right-hand side of the circulation transport formula
/// along a loop advected with the same driver, and reports the closure
/// residual. Works for every model family; the field trajectory and loop
/// flow must store every step.
CirculationDecomposition circulation_transport_decomposition(const Model& model, const FieldTrajectory& traj,
                                                             const MaterialLoop& loop, const FlowEnsemble& loop_flow,
                                                             Flavor flavor);

/// Flux of vorticity through the region bounded by a contractible loop.
/// 2D: vorticity split into its mean and a Biot-Savart part, integrated by
/// Green's theorem. 3D: curl u integrated over the cone from the loop
/// centroid with spectral quadrature in s and Gauss-Legendre in the radius.
double vorticity_flux(const SpectralField& u, const MaterialLoop& loop);

struct EnergyLedger {
  std::vector<double> times;
  std::vector<double> energy;                // 1/2 |u|^2
  std::vector<double> dissipation_integral;  // nu sum int |P(eta.grad u)|^2
  std::vector<double> drift_noise_group;     // int 1/2 sum (P(u.grad xi + grad xi^T u), L^T u) dt
  std::vector<double> viscous_group;         // int -nu sum (L^T_eta u, [eta, u]) dt
  std::vector<double> martingale_group;      // int -sum (u, grad xi^T u) dW
  std::vector<double> closure;

  double max_closure() const;
};

/// Energy bookkeeping along a field trajectory saved every step.
/// Circulation families (Stratonovich drift): closure = E_t - E_0 - (accumulated groups).
/// Energy families: closure = E_t + dissipation_integral - E_0.
/// Other cases: the groups are -(u, f) + 1/2 sum |G_k u|^2 and -(u, G_k u).
EnergyLedger energy_ledger(const Model& model, const FieldTrajectory& traj);

enum class WeberMode { pullback, label_grid };

std::string to_string(WeberMode m);
WeberMode weber_mode_from_string(const std::string& s);

struct WeberReport {
  WeberMode mode = WeberMode::pullback;
  std::vector<double> times;
  std::vector<double> residual;       // curl ratio (pullback) or reconstruction error (label_grid)
  std::vector<double> loop_mismatch;  // pullback with a loop flow: |closed integral of r|, else empty
};

/// Pullback mode: label_flow must carry deformation gradients for the
/// particles of label_grid_points(d, label_n).
WeberReport weber_pullback(const FieldTrajectory& traj, const FlowEnsemble& label_flow, int label_n,
                           const MaterialLoop* loop = nullptr, const FlowEnsemble* loop_flow = nullptr);

/// Label-grid mode: || P[(I + grad a)^T u_0(x + a)] - u_t || / ||u_t|| at the label times.
WeberReport weber_label_grid(const FieldTrajectory& traj, const LabelTrajectory& labels);

/// Reconstruction P[(I + grad a)^T u_0(x + a)] for one displacement field.
SpectralField weber_reconstruction(const SpectralField& u0, const SpectralField& a);

/// 2D: max |omega_t(X_t(a)) - omega_0(a)| / max |omega_0|.
/// 3D: max |omega_t(X_t(a)) - grad X_t(a) omega_0(a)| / max |omega_0| (needs defgrad).
TimeSeries cauchy_residual(const FieldTrajectory& traj, const FlowEnsemble& flow);

/// (u, curl u). 3D only.
double helicity(const SpectralField& u);
/// (A, B). 3D only.
double magnetic_helicity(const SpectralField& A, const SpectralField& B);

/// CSV with a header row; columns[i] must all match times.size().
void write_series_csv(const std::string& path, const std::vector<double>& times,
                      const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns);

}  // namespace kelvinlab
