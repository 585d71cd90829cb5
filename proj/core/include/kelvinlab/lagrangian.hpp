#pragma once

#include <array>
#include <span>
#include <vector>

#include "kelvinlab/grid.hpp"
#include "kelvinlab/integrator.hpp"
#include "kelvinlab/model.hpp"
#include "kelvinlab/noise.hpp"

namespace kelvinlab {

enum class Flavor { strat, ito };

std::string to_string(Flavor f);
Flavor flavor_from_string(const std::string& s);

/// Row-major 3x3; only the leading d x d block is used. M[i*3+j] = dX^i/da^j.
using Mat3 = std::array<double, 9>;

Mat3 identity_mat();
double det(const Mat3& m, int d);

/// Closed curve Gamma(s_j), s_j = j/P, stored unwrapped:
/// Gamma(s + 1) = Gamma(s) + 2 pi winding.
class MaterialLoop {
 public:
  MaterialLoop() = default;
  MaterialLoop(int d, std::vector<Point> points, std::array<int, 3> winding = {0, 0, 0});

  int dim() const { return d_; }
  std::size_t size() const { return pts_.size(); }
  const std::vector<Point>& points() const { return pts_; }
  const std::array<int, 3>& winding() const { return winding_; }
  bool contractible() const { return winding_ == std::array<int, 3>{0, 0, 0}; }

  /// dGamma/ds by spectral differentiation of the periodic part.
  std::vector<Point> tangents() const;
  double max_gap() const;
  double mean_gap() const;
  /// Max gap at most 4 x mean gap.
  bool spacing_ok() const { return max_gap() <= 4.0 * mean_gap(); }

  MaterialLoop reversed() const;
  /// Doubles P by trigonometric interpolation in s.
  MaterialLoop refined() const;
  /// Enclosed signed area of a 2D contractible loop (x-y plane for 3D).
  double signed_area() const;

  /// Same loop through new (unwrapped) positions.
  MaterialLoop moved(std::vector<Point> pts) const { return MaterialLoop(d_, std::move(pts), winding_); }

 private:
  int d_ = 0;
  std::vector<Point> pts_;
  std::array<int, 3> winding_{0, 0, 0};
};

enum class LoopKind { circle, axis_line, custom };

struct LoopSpec {
  LoopKind kind = LoopKind::circle;
  Point center{0.0, 0.0, 0.0};  // circle center; axis_line offset in the transverse axes
  double radius = 1.0;
  int axis = 0;  // axis_line direction
  std::vector<Point> points;
  std::array<int, 3> winding{0, 0, 0};
  int P = 256;
};

MaterialLoop make_loop(int d, const LoopSpec& spec);
/// Circle in the x-y plane (z = center[2] in 3D).
MaterialLoop make_circle(int d, const Point& center, double radius, int P);
/// Line {y = c} in 2D, or an axis-parallel line through `offset` in 3D.
MaterialLoop make_axis_line(int d, double c, int P, int axis = 0, const Point& offset = {0.0, 0.0, 0.0});

struct FlowOptions {
  Flavor flavor = Flavor::strat;
  bool defgrad = false;
  /// Include the sqrt(2 nu) eta dB channels (NS families).
  bool use_b = false;
  int workers = 1;
  /// Store every store_stride-th step (the final step is always stored).
  int store_stride = 1;
};

struct FlowEnsemble {
  int d = 0;
  Flavor flavor = Flavor::strat;
  Scheme scheme = Scheme::strat_heun;
  std::vector<double> times;
  std::vector<std::vector<Point>> positions;  // [time][particle]
  std::vector<std::vector<Mat3>> defgrad;     // [time][particle] when requested
  std::size_t particles() const { return positions.empty() ? 0 : positions.front().size(); }
};

/// Advances particles along the stochastic flow of a stored field trajectory.
/// The time scheme follows the field scheme: Heun on the Stratonovich form,
/// or Euler-Maruyama on the Ito form. The deformation gradient is stepped
/// jointly when requested.
FlowEnsemble advect(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                    const std::vector<Point>& x0, const FlowOptions& opt);

/// advect with the deformation gradient enabled.
FlowEnsemble evolve_deformation(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                                const std::vector<Point>& x0, FlowOptions opt);

struct LoopFlow {
  MaterialLoop initial;  // possibly refined
  FlowEnsemble flow;
  int refinements = 0;
};

/// Advects a loop, doubling P and re-running whenever the spacing invariant
/// trips. Gives up with ResolutionError beyond max_points.
LoopFlow advect_loop(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                     const MaterialLoop& loop, const FlowOptions& opt, std::size_t max_points = 8192);

struct JacobianReport {
  double max_rel_mismatch = 0.0;    // over points and times
  double final_rel_mismatch = 0.0;  // over points at the final time
  std::vector<double> log_det_direct;
  std::vector<double> log_det_formula;
};

/// Compares det(grad X_t) with the exponential formula for the Ito flow
/// dX = b dt + sum xi_k dW_k. b holds one field per time level (or a single
/// steady field); xi may be compressible.
JacobianReport jacobian_formula_check(const std::vector<SpectralField>& b, const std::vector<SpectralField>& xi,
                                      const BrownianDriver& driver, long n_steps, const std::vector<Point>& pts,
                                      Scheme scheme = Scheme::strat_heun);

struct LabelOptions {
  double steepening_bound = 50.0;
  /// Keep every save_stride-th displacement field (0 keeps only t = 0 and the final one).
  int save_stride = 0;
};

struct LabelTrajectory {
  std::vector<double> times;
  std::vector<SpectralField> a;  // displacement A_t(x) - x
  const SpectralField& final() const { return a.back(); }
};

/// Back-to-labels displacement a_t = A_t - x solving
/// da + (u + u.grad a) dt + sum (xi + xi.grad a) o dW + sqrt(2 nu) sum (eta + eta.grad a) o dB = 0.
LabelTrajectory solve_back_to_labels(const FieldTrajectory& traj, const Model& model, const BrownianDriver& driver,
                                     const LabelOptions& opt = {});

/// Uniform grid of label points (n per axis) in the torus, x fastest.
std::vector<Point> label_grid_points(int d, int n);

/// Loop trajectory dump with columns t, s_index, x_1..x_d.
void write_loop_csv(const std::string& path, const FlowEnsemble& flow);

}  // namespace kelvinlab
