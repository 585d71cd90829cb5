#pragma once

#include <span>
#include <string>
#include <vector>

#include "kelvinlab/grid.hpp"
#include "kelvinlab/model.hpp"
#include "kelvinlab/noise.hpp"

namespace kelvinlab {

enum class Scheme { strat_heun, ito_em };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct FieldTrajectory {
  std::vector<double> times;
  std::vector<long> steps;
  std::vector<SpectralField> snapshots;
  int save_stride = 1;
  double dt = 0.0;
  long n_steps = 0;
  Scheme scheme = Scheme::strat_heun;
  BrownianDriver driver;
  ModelSpec model;

  const SpectralField& final() const { return snapshots.back(); }
  /// Hash of every snapshot; equal digests mean bitwise equal trajectories.
  std::string digest() const;
};

/// Largest max|u| dt / h before the explicit stepper refuses to continue.
constexpr double kCflLimit = 0.5;

/// One step. dW must have K_W entries. Throws StabilityError on CFL or NaN.
SpectralField advance(const Model& model, const SpectralField& state, double dt, std::span<const double> dW,
                      Scheme scheme, long step_index = 0);

FieldTrajectory run(const Model& model, const SpectralField& u0, double T, double dt, const BrownianDriver& driver,
                    Scheme scheme, int save_stride = 1);

/// Number of steps for a horizon T; rejects non-integral T/dt.
long step_count(double T, double dt);

}  // namespace kelvinlab
