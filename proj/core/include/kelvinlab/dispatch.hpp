#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kelvinlab/config.hpp"
#include "kelvinlab/integrator.hpp"
#include "kelvinlab/lagrangian.hpp"
#include "kelvinlab/model.hpp"

namespace kelvinlab {

/// Everything needed for one field run, built from a config.
struct Setup {
  RunConfig cfg;
  TorusGrid grid;
  Model model;
  SpectralField u0;
  BrownianDriver driver;
  std::vector<MaterialLoop> loops;
  double dt = 0.0;
  long n_steps = 0;
};

/// dt <= 0 uses cfg.time.dt. refinement subdivides the Brownian mesh (see BrownianDriver).
Setup build_setup(const RunConfig& cfg, double dt = 0.0, int refinement = 1);

/// Initial velocity: random (solenoidal, scaled to max |u| = amplitude), shear
/// amplitude*(sin y, 0[, 0]), abc amplitude*(sin z + cos y, sin x + cos z, sin y + cos x),
/// or a field file (must be solenoidal and on the config grid).
SpectralField build_initial(const RunConfig& cfg, const TorusGrid& g);

/// Field trajectory storing every step.
FieldTrajectory run_setup(const Setup& s);

/// Scalar error metric of one run at the final time, used by dt sweeps:
///   kelvin      max over loops of |C_T - C_0| / (|C_0| + |u_0|)
///   closure     max over loops of the circulation transport closure, same scale
///   energy      |energy ledger closure| / E_0
///   weber       pullback Weber residual
///   weber_label label-grid Weber residual
///   cauchy      Cauchy residual
///   jacobian    max |det grad X - 1| over the label grid
///   helicity    relative helicity drift (3D)
double dt_metric(const std::string& metric, const Setup& s, const FieldTrajectory& traj, int workers);

struct DispatchOptions {
  std::string out_dir;  // empty: config output.directory, then $KELVINLAB_OUT, then ./kelvinlab_out
  int threads = 1;
};

/// SHA-256 of the resolved config text.
std::string config_digest(const RunConfig& cfg);

/// Runs a subcommand, writes artifacts and the manifest, returns 0 (ok) or
/// 1 (check failed). Errors propagate as exceptions.
int dispatch(const std::string& subcommand, const RunConfig& cfg, const DispatchOptions& opt);

const std::vector<std::string>& subcommands();

}  // namespace kelvinlab
