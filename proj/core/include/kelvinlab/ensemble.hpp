#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kelvinlab/integrator.hpp"
#include "kelvinlab/lagrangian.hpp"
#include "kelvinlab/model.hpp"

namespace kelvinlab {

struct RunConfig;
enum class SweepKind;

struct EnsembleOptions {
  std::size_t M = 256;
  std::uint64_t b_seed_base = 0;
  int workers = 1;
  double steepening_bound = 50.0;
  double max_failure_fraction = 0.1;
};

struct ConditionalEstimate {
  double target = 0.0;  // closed-loop integral of u_T
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  std::size_t M = 0;
  std::size_t failures = 0;
  std::uint64_t w_seed = 0;
  std::uint64_t b_seed_base = 0;
  std::string field_digest;
  std::vector<double> members;  // image-loop integral per member, NaN where the member failed
  double max_failure_fraction = 0.1;

  /// Estimate from the first m members (nested subsets share members).
  ConditionalEstimate subset(std::size_t m) const;
  std::string to_json() const;
};

/// (1/P) sum_j Gamma'(s_j) . (I + grad a)^T u0(Gamma(s_j) + a(Gamma(s_j))).
double image_loop_integral(const SpectralField& u0, const SpectralField& a, const MaterialLoop& loop);

/// Conditional Kelvin estimate for every loop from one field trajectory.
/// Member m solves the back-to-labels equation with the trajectory's W
/// increments and B stream member_b_seed(b_seed_base, m). The trajectory must
/// store every step. Failed members (label steepening, instability) are
/// excluded; more than max_failure_fraction failures throws ResolutionError.
std::vector<ConditionalEstimate> conditional_kelvin(const Model& model, const FieldTrajectory& traj,
                                                    const std::vector<MaterialLoop>& loops,
                                                    const EnsembleOptions& opt);

/// Runs the field once for w_seed (Heun) and estimates for one loop.
ConditionalEstimate conditional_kelvin(const Model& model, const SpectralField& u0, const MaterialLoop& loop, double T,
                                       double dt, std::uint64_t w_seed, const EnsembleOptions& opt);

struct WeberEstimate {
  double distance = 0.0;  // ||mean reconstruction - u_T|| / ||u_T||
  SpectralField mean_field;
  std::size_t M = 0;
  std::size_t failures = 0;
  std::string field_digest;
};

/// Averages P[(I + grad a_m)^T u0(x + a_m)] over members on the grid.
WeberEstimate conditional_weber(const Model& model, const FieldTrajectory& traj, const EnsembleOptions& opt);

struct SweepPoint {
  double x = 0.0;       // dt, member count or amplitude
  double value = 0.0;   // metric at this point
  double runtime_s = 0.0;
};

struct SweepReport {
  std::string kind;
  std::string metric;
  std::vector<SweepPoint> points;
  double slope = 0.0;  // least squares in log-log
};

/// dt_halving: metric at each dt (same Brownian path, shared fine mesh);
/// m_scaling: conditional Kelvin stderr at each member count (nested members);
/// amplitude: |u_T(a) - u_T(0)| / |u_T(0)| at each noise amplitude.
/// Metrics for dt_halving: kelvin, energy, weber, cauchy, jacobian, closure.
SweepReport run_sweep(const RunConfig& cfg, int workers = 1);

}  // namespace kelvinlab
