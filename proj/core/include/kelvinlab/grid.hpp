#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kelvinlab {

using cplx = std::complex<double>;
using Point = std::array<double, 3>;

/// Periodic box [0, 2pi)^d sampled on n points per axis.
///
/// Physical samples are stored with x fastest: ix + n*(iy + n*iz).
/// Fourier coefficients use the real-to-complex half spectrum along x:
/// ikx + (n/2+1)*(iky + n*ikz), normalized so f(x) = sum_k c_k exp(i k.x).
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int d, int n_per_axis, double dealias_fraction = 2.0 / 3.0);

  int dim() const { return d_; }
  int n() const { return n_; }
  double length() const;
  double spacing() const;
  double dealias_fraction() const { return frac_; }
  /// Largest retained |k| per axis under the dealiasing mask.
  int kmax() const { return kmax_; }
  int nh() const { return n_ / 2 + 1; }
  std::size_t size() const { return size_; }
  std::size_t spectral_size() const { return ssize_; }
  double cell_volume() const;
  double volume() const;
  bool valid() const { return d_ != 0; }

  /// Signed wavenumber of FFT index i along a full axis.
  int wavenumber(int i) const { return i < n_ / 2 ? i : i - n_; }
  /// Wavevector (kx, ky, kz) of spectral index s; unused entries are 0.
  std::array<int, 3> wavevector(std::size_t s) const;
  /// True when s lies inside the dealiasing mask.
  bool in_band(std::size_t s) const { return mask_[s] != 0; }
  /// Multiplicity of a half-spectrum coefficient in the full spectrum (1 or 2).
  double hermitian_weight(std::size_t s) const;
  /// True for modes touching a Nyquist index, which derivatives drop.
  bool is_nyquist(std::size_t s) const;

  Point node(std::size_t i) const;

  void forward(const double* in, cplx* out) const;
  void inverse(const cplx* in, double* out) const;

  std::string describe() const;

  friend bool operator==(const TorusGrid& a, const TorusGrid& b) {
    return a.d_ == b.d_ && a.n_ == b.n_ && a.frac_ == b.frac_;
  }

 private:
  struct Plans;
  int d_ = 0;
  int n_ = 0;
  double frac_ = 2.0 / 3.0;
  int kmax_ = 0;
  std::size_t size_ = 0;
  std::size_t ssize_ = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> mask_holder_;
  const std::uint8_t* mask_ = nullptr;
  std::shared_ptr<Plans> plans_;
};

/// Scalar (1 component) or vector (d components) periodic field.
///
/// Physical and spectral representations are kept in sync at all times;
/// every constructor and operation produces both.
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(const TorusGrid& g, int components);

  static SpectralField from_physical(const TorusGrid& g, int components, std::vector<double> values);
  static SpectralField from_spectral(const TorusGrid& g, int components, std::vector<cplx> coeffs);
  /// Sample fn at the nodes. fn writes `components` values for a point.
  static SpectralField from_function(const TorusGrid& g, int components,
                                     const std::function<void(const Point&, double*)>& fn);
  static SpectralField scalar(const TorusGrid& g, const std::function<double(const Point&)>& fn);
  static SpectralField vector(const TorusGrid& g, const std::function<Point(const Point&)>& fn);
  static SpectralField constant(const TorusGrid& g, std::span<const double> value);

  const TorusGrid& grid() const { return grid_; }
  int components() const { return comps_; }
  bool is_scalar() const { return comps_ == 1; }
  bool is_vector() const { return comps_ == grid_.dim(); }
  bool empty() const { return comps_ == 0; }

  std::span<const double> physical() const { return phys_; }
  std::span<const double> physical(int c) const;
  std::span<const cplx> spectral() const { return spec_; }
  std::span<const cplx> spectral(int c) const;

  SpectralField component(int c) const;
  static SpectralField stack(const std::vector<SpectralField>& parts);

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double a);
  /// this += a * x, applied to both representations without transforms.
  SpectralField& axpy(double a, const SpectralField& x);

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
  friend SpectralField operator-(SpectralField a) { return a *= -1.0; }

  /// True when every coefficient outside the dealiasing band is exactly zero.
  bool band_limited() const;

 private:
  TorusGrid grid_;
  int comps_ = 0;
  std::vector<double> phys_;
  std::vector<cplx> spec_;
};

void require_same_grid(const SpectralField& a, const SpectralField& b, const char* op);
void require_vector(const SpectralField& f, const char* op);
void require_scalar(const SpectralField& f, const char* op);

enum class DiffKind { gradient, divergence, curl, laplacian };

SpectralField spectral_differentiate(const SpectralField& f, DiffKind kind);
SpectralField gradient(const SpectralField& f);
SpectralField divergence(const SpectralField& f);
SpectralField curl(const SpectralField& f);
SpectralField laplacian(const SpectralField& f);
/// d/dx_axis applied to every component.
SpectralField partial(const SpectralField& f, int axis);

SpectralField leray_project(const SpectralField& v);
/// Zero-mean q with -lap q = rhs. A nonzero mean in rhs is dropped.
SpectralField poisson_solve(const SpectralField& rhs, double* dropped_mean = nullptr);
SpectralField dealias(const SpectralField& f);
/// g(x) = f(x - shift).
SpectralField translate(const SpectralField& f, const Point& shift);

/// Pointwise product of a scalar field and any field, dealiased.
SpectralField multiply(const SpectralField& s, const SpectralField& f);
/// Build a field from physical values and apply the dealiasing mask.
SpectralField dealiased_from_physical(const TorusGrid& g, int components, std::vector<double> values);

double inner_product(const SpectralField& a, const SpectralField& b);
double spectral_inner_product(const SpectralField& a, const SpectralField& b);
double norm_l2(const SpectralField& f);
double max_abs(const SpectralField& f);
double mean(const SpectralField& f, int component = 0);

/// Relative L2 norm of the divergence of v.
double divergence_ratio(const SpectralField& v);

/// Seeded random field with coefficients on |k|_inf <= kmax, zero mean.
SpectralField random_field(const TorusGrid& g, int components, std::uint64_t seed, int kmax,
                           bool solenoidal = false);

/// Repeated exact trigonometric evaluation of one field at arbitrary points.
class PointSampler {
 public:
  explicit PointSampler(const SpectralField& f);
  int components() const { return comps_; }
  int dim() const { return d_; }
  /// values[c]; grad[c*d + j] = d f_c / d x_j when grad is non-null.
  void sample(const Point& x, double* values, double* grad = nullptr) const;

 private:
  struct Mode {
    std::array<int, 3> k;
    std::vector<cplx> c;  // weighted coefficient per component
  };
  void sample_sparse(const Point& x, double* values, double* grad) const;
  void sample_dense(const Point& x, double* values, double* grad) const;

  int d_ = 0;
  int comps_ = 0;
  int kb_ = 0;  // kx range [0, kb_], other axes [-kb_, kb_]
  int width_ = 0;
  bool sparse_ = false;
  std::vector<Mode> modes_;
  // dense layout: [c][kz][ky][kx] with ky,kz shifted by kb_
  std::vector<cplx> dense_;
};

/// d/ds of samples of a 1-periodic function on s_j = j/P (spectral, Nyquist dropped).
std::vector<double> periodic_derivative(std::span<const double> v);
/// Trigonometric interpolation of a 1-periodic sequence onto m >= P points.
std::vector<double> periodic_resample(std::span<const double> v, std::size_t m);

/// values[p*C + c]
std::vector<double> evaluate_at_points(const SpectralField& f, const std::vector<Point>& pts);

}  // namespace kelvinlab
