#include "kelvinlab/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "kelvinlab/error.hpp"
#include "kelvinlab/rng.hpp"

namespace kelvinlab {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

struct TorusGrid::Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  std::size_t n_real = 0;
  std::size_t n_cplx = 0;

  Plans(int d, int n) {
    int dims[3] = {n, n, n};
    n_real = 1;
    for (int i = 0; i < d; ++i) n_real *= static_cast<std::size_t>(n);
    n_cplx = n_real / static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1);
    std::lock_guard<std::mutex> lock(planner_mutex());
    double* rbuf = fftw_alloc_real(n_real);
    fftw_complex* cbuf = fftw_alloc_complex(n_cplx);
    r2c = fftw_plan_dft_r2c(d, dims, rbuf, cbuf, FFTW_ESTIMATE | FFTW_UNALIGNED);
    c2r = fftw_plan_dft_c2r(d, dims, cbuf, rbuf, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(rbuf);
    fftw_free(cbuf);
  }
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(r2c);
    fftw_destroy_plan(c2r);
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
};

TorusGrid::TorusGrid(int d, int n_per_axis, double dealias_fraction)
    : d_(d), n_(n_per_axis), frac_(dealias_fraction) {
  if (d != 2 && d != 3) throw InvalidArgument("TorusGrid: dimension must be 2 or 3");
  if (n_per_axis < 8 || n_per_axis % 2 != 0)
    throw InvalidArgument("TorusGrid: n_per_axis must be even and at least 8");
  if (!(dealias_fraction > 0.0 && dealias_fraction <= 1.0))
    throw InvalidArgument("TorusGrid: dealias_fraction must lie in (0, 1]");
  kmax_ = static_cast<int>(std::ceil(frac_ * n_ / 2.0 - 1e-12)) - 1;
  kmax_ = std::clamp(kmax_, 0, n_ / 2 - 1);
  size_ = 1;
  for (int i = 0; i < d_; ++i) size_ *= static_cast<std::size_t>(n_);
  ssize_ = size_ / static_cast<std::size_t>(n_) * static_cast<std::size_t>(nh());

  auto mask = std::make_shared<std::vector<std::uint8_t>>(ssize_);
  for (std::size_t s = 0; s < ssize_; ++s) {
    auto k = wavevector(s);
    bool keep = true;
    for (int a = 0; a < d_; ++a) keep = keep && std::abs(k[a]) <= kmax_;
    (*mask)[s] = keep ? 1 : 0;
  }
  mask_holder_ = mask;
  mask_ = mask->data();
  plans_ = std::make_shared<Plans>(d_, n_);
}

double TorusGrid::length() const { return kTwoPi; }
double TorusGrid::spacing() const { return kTwoPi / n_; }
double TorusGrid::cell_volume() const { return std::pow(spacing(), d_); }
double TorusGrid::volume() const { return std::pow(kTwoPi, d_); }

std::array<int, 3> TorusGrid::wavevector(std::size_t s) const {
  const std::size_t h = static_cast<std::size_t>(nh());
  const std::size_t nn = static_cast<std::size_t>(n_);
  std::array<int, 3> k{0, 0, 0};
  k[0] = static_cast<int>(s % h);
  std::size_t rest = s / h;
  k[1] = wavenumber(static_cast<int>(rest % nn));
  if (d_ == 3) k[2] = wavenumber(static_cast<int>(rest / nn));
  return k;
}

double TorusGrid::hermitian_weight(std::size_t s) const {
  const int kx = static_cast<int>(s % static_cast<std::size_t>(nh()));
  return (kx == 0 || kx == n_ / 2) ? 1.0 : 2.0;
}

bool TorusGrid::is_nyquist(std::size_t s) const {
  auto k = wavevector(s);
  for (int a = 0; a < d_; ++a)
    if (k[a] == n_ / 2 || k[a] == -n_ / 2) return true;
  return false;
}

Point TorusGrid::node(std::size_t i) const {
  const std::size_t nn = static_cast<std::size_t>(n_);
  const double h = spacing();
  Point p{0.0, 0.0, 0.0};
  p[0] = static_cast<double>(i % nn) * h;
  p[1] = static_cast<double>((i / nn) % nn) * h;
  if (d_ == 3) p[2] = static_cast<double>(i / (nn * nn)) * h;
  return p;
}

void TorusGrid::forward(const double* in, cplx* out) const {
  // r2c leaves its input intact, and FFTW_UNALIGNED plans accept any arrays.
  fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
  const double inv = 1.0 / static_cast<double>(size_);
  for (std::size_t s = 0; s < ssize_; ++s) out[s] *= inv;
}

void TorusGrid::inverse(const cplx* in, double* out) const {
  std::vector<cplx> tmp(in, in + ssize_);
  fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(tmp.data()), out);
}

std::string TorusGrid::describe() const {
  std::ostringstream os;
  os << n_;
  for (int i = 1; i < d_; ++i) os << 'x' << n_;
  return os.str();
}

// ---------------------------------------------------------------------------

SpectralField::SpectralField(const TorusGrid& g, int components)
    : grid_(g), comps_(components), phys_(g.size() * components, 0.0), spec_(g.spectral_size() * components) {
  if (components != 1 && components != g.dim()) throw InvalidArgument("SpectralField: components must be 1 or d");
}

SpectralField SpectralField::from_physical(const TorusGrid& g, int components, std::vector<double> values) {
  if (values.size() != g.size() * static_cast<std::size_t>(components))
    throw InvalidArgument("SpectralField::from_physical: size mismatch");
  SpectralField f(g, components);
  f.phys_ = std::move(values);
  for (int c = 0; c < components; ++c)
    g.forward(f.phys_.data() + c * g.size(), f.spec_.data() + c * g.spectral_size());
  return f;
}

SpectralField SpectralField::from_spectral(const TorusGrid& g, int components, std::vector<cplx> coeffs) {
  if (coeffs.size() != g.spectral_size() * static_cast<std::size_t>(components))
    throw InvalidArgument("SpectralField::from_spectral: size mismatch");
  SpectralField f(g, components);
  f.spec_ = std::move(coeffs);
  for (int c = 0; c < components; ++c)
    g.inverse(f.spec_.data() + c * g.spectral_size(), f.phys_.data() + c * g.size());
  return f;
}

SpectralField SpectralField::from_function(const TorusGrid& g, int components,
                                           const std::function<void(const Point&, double*)>& fn) {
  std::vector<double> v(g.size() * components);
  std::vector<double> tmp(components);
  for (std::size_t i = 0; i < g.size(); ++i) {
    fn(g.node(i), tmp.data());
    for (int c = 0; c < components; ++c) v[c * g.size() + i] = tmp[c];
  }
  return from_physical(g, components, std::move(v));
}

SpectralField SpectralField::scalar(const TorusGrid& g, const std::function<double(const Point&)>& fn) {
  return from_function(g, 1, [&](const Point& p, double* out) { out[0] = fn(p); });
}

SpectralField SpectralField::vector(const TorusGrid& g, const std::function<Point(const Point&)>& fn) {
  const int d = g.dim();
  return from_function(g, d, [&](const Point& p, double* out) {
    Point v = fn(p);
    for (int c = 0; c < d; ++c) out[c] = v[c];
  });
}

SpectralField SpectralField::constant(const TorusGrid& g, std::span<const double> value) {
  const int comps = static_cast<int>(value.size());
  SpectralField f(g, comps);
  for (int c = 0; c < comps; ++c) {
    std::fill(f.phys_.begin() + c * g.size(), f.phys_.begin() + (c + 1) * g.size(), value[c]);
    f.spec_[c * g.spectral_size()] = value[c];
  }
  return f;
}

std::span<const double> SpectralField::physical(int c) const {
  return std::span<const double>(phys_).subspan(c * grid_.size(), grid_.size());
}

std::span<const cplx> SpectralField::spectral(int c) const {
  return std::span<const cplx>(spec_).subspan(c * grid_.spectral_size(), grid_.spectral_size());
}

SpectralField SpectralField::component(int c) const {
  if (c < 0 || c >= comps_) throw InvalidArgument("SpectralField::component: index out of range");
  SpectralField f(grid_, 1);
  auto p = physical(c);
  auto s = spectral(c);
  std::copy(p.begin(), p.end(), f.phys_.begin());
  std::copy(s.begin(), s.end(), f.spec_.begin());
  return f;
}

SpectralField SpectralField::stack(const std::vector<SpectralField>& parts) {
  if (parts.empty()) throw InvalidArgument("SpectralField::stack: no parts");
  const TorusGrid& g = parts.front().grid();
  int comps = 0;
  for (const auto& p : parts) {
    require_same_grid(parts.front(), p, "stack");
    comps += p.components();
  }
  SpectralField f(g, comps);
  std::size_t po = 0, so = 0;
  for (const auto& p : parts) {
    std::copy(p.phys_.begin(), p.phys_.end(), f.phys_.begin() + po);
    std::copy(p.spec_.begin(), p.spec_.end(), f.spec_.begin() + so);
    po += p.phys_.size();
    so += p.spec_.size();
  }
  return f;
}

SpectralField& SpectralField::operator+=(const SpectralField& o) { return axpy(1.0, o); }
SpectralField& SpectralField::operator-=(const SpectralField& o) { return axpy(-1.0, o); }

SpectralField& SpectralField::operator*=(double a) {
  for (auto& v : phys_) v *= a;
  for (auto& v : spec_) v *= a;
  return *this;
}

SpectralField& SpectralField::axpy(double a, const SpectralField& x) {
  require_same_grid(*this, x, "axpy");
  if (comps_ != x.comps_) throw InvalidArgument("axpy: rank mismatch");
  for (std::size_t i = 0; i < phys_.size(); ++i) phys_[i] += a * x.phys_[i];
  for (std::size_t i = 0; i < spec_.size(); ++i) spec_[i] += a * x.spec_[i];
  return *this;
}

bool SpectralField::band_limited() const {
  const std::size_t ns = grid_.spectral_size();
  for (int c = 0; c < comps_; ++c)
    for (std::size_t s = 0; s < ns; ++s)
      if (!grid_.in_band(s) && spec_[c * ns + s] != cplx{}) return false;
  return true;
}

void require_same_grid(const SpectralField& a, const SpectralField& b, const char* op) {
  if (!(a.grid() == b.grid())) throw InvalidArgument(std::string(op) + ": grid mismatch");
}

void require_vector(const SpectralField& f, const char* op) {
  if (!f.is_vector()) throw InvalidArgument(std::string(op) + ": vector field required");
}

void require_scalar(const SpectralField& f, const char* op) {
  if (!f.is_scalar()) throw InvalidArgument(std::string(op) + ": scalar field required");
}

// ---------------------------------------------------------------------------

namespace {

// Multiply every component by a per-mode complex symbol and transform back.
template <class Symbol>
SpectralField apply_symbol(const SpectralField& f, int out_comps, Symbol&& symbol) {
  const TorusGrid& g = f.grid();
  const std::size_t ns = g.spectral_size();
  std::vector<cplx> out(ns * out_comps);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto k = g.wavevector(s);
    symbol(s, k, f, out);
  }
  return SpectralField::from_spectral(g, out_comps, std::move(out));
}

}  // namespace

SpectralField partial(const SpectralField& f, int axis) {
  const TorusGrid& g = f.grid();
  if (axis < 0 || axis >= g.dim()) throw InvalidArgument("partial: axis out of range");
  const int C = f.components();
  const std::size_t ns = g.spectral_size();
  return apply_symbol(f, C, [&](std::size_t s, const std::array<int, 3>& k, const SpectralField& in,
                                std::vector<cplx>& out) {
    if (g.is_nyquist(s)) return;
    const cplx ik(0.0, static_cast<double>(k[axis]));
    for (int c = 0; c < C; ++c) out[c * ns + s] = ik * in.spectral()[c * ns + s];
  });
}

SpectralField gradient(const SpectralField& f) {
  require_scalar(f, "gradient");
  const TorusGrid& g = f.grid();
  const int d = g.dim();
  const std::size_t ns = g.spectral_size();
  return apply_symbol(f, d, [&](std::size_t s, const std::array<int, 3>& k, const SpectralField& in,
                                std::vector<cplx>& out) {
    if (g.is_nyquist(s)) return;
    const cplx c = in.spectral()[s];
    for (int a = 0; a < d; ++a) out[a * ns + s] = cplx(0.0, k[a]) * c;
  });
}

SpectralField divergence(const SpectralField& f) {
  require_vector(f, "divergence");
  const TorusGrid& g = f.grid();
  const int d = g.dim();
  const std::size_t ns = g.spectral_size();
  return apply_symbol(f, 1, [&](std::size_t s, const std::array<int, 3>& k, const SpectralField& in,
                                std::vector<cplx>& out) {
    if (g.is_nyquist(s)) return;
    cplx acc{};
    for (int a = 0; a < d; ++a) acc += cplx(0.0, k[a]) * in.spectral()[a * ns + s];
    out[s] = acc;
  });
}

SpectralField curl(const SpectralField& f) {
  require_vector(f, "curl");
  const TorusGrid& g = f.grid();
  const int d = g.dim();
  const std::size_t ns = g.spectral_size();
  return apply_symbol(f, d == 2 ? 1 : 3, [&](std::size_t s, const std::array<int, 3>& k, const SpectralField& in,
                                             std::vector<cplx>& out) {
    if (g.is_nyquist(s)) return;
    auto u = [&](int a) { return in.spectral()[a * ns + s]; };
    const cplx i(0.0, 1.0);
    if (d == 2) {
      out[s] = i * (double(k[0]) * u(1) - double(k[1]) * u(0));
    } else {
      out[0 * ns + s] = i * (double(k[1]) * u(2) - double(k[2]) * u(1));
      out[1 * ns + s] = i * (double(k[2]) * u(0) - double(k[0]) * u(2));
      out[2 * ns + s] = i * (double(k[0]) * u(1) - double(k[1]) * u(0));
    }
  });
}

SpectralField laplacian(const SpectralField& f) {
  const TorusGrid& g = f.grid();
  const int C = f.components();
  const std::size_t ns = g.spectral_size();
  return apply_symbol(f, C, [&](std::size_t s, const std::array<int, 3>& k, const SpectralField& in,
                                std::vector<cplx>& out) {
    const double k2 = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
    for (int c = 0; c < C; ++c) out[c * ns + s] = -k2 * in.spectral()[c * ns + s];
  });
}

SpectralField spectral_differentiate(const SpectralField& f, DiffKind kind) {
  switch (kind) {
    case DiffKind::gradient: return gradient(f);
    case DiffKind::divergence: return divergence(f);
    case DiffKind::curl: return curl(f);
    case DiffKind::laplacian: return laplacian(f);
  }
  throw InvalidArgument("spectral_differentiate: unknown kind");
}

SpectralField leray_project(const SpectralField& v) {
  require_vector(v, "leray_project");
  const TorusGrid& g = v.grid();
  const int d = g.dim();
  const std::size_t ns = g.spectral_size();
  return apply_symbol(v, d, [&](std::size_t s, const std::array<int, 3>& k, const SpectralField& in,
                                std::vector<cplx>& out) {
    const double k2 = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
    if (k2 == 0.0) {
      for (int a = 0; a < d; ++a) out[a * ns + s] = in.spectral()[a * ns + s];
      return;
    }
    cplx kv{};
    for (int a = 0; a < d; ++a) kv += double(k[a]) * in.spectral()[a * ns + s];
    for (int a = 0; a < d; ++a) out[a * ns + s] = in.spectral()[a * ns + s] - (double(k[a]) / k2) * kv;
  });
}

SpectralField poisson_solve(const SpectralField& rhs, double* dropped_mean) {
  require_scalar(rhs, "poisson_solve");
  if (dropped_mean) *dropped_mean = rhs.spectral()[0].real();
  return apply_symbol(rhs, 1, [&](std::size_t s, const std::array<int, 3>& k, const SpectralField& in,
                                  std::vector<cplx>& out) {
    const double k2 = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
    if (k2 != 0.0) out[s] = in.spectral()[s] / k2;
  });
}

SpectralField dealias(const SpectralField& f) {
  const TorusGrid& g = f.grid();
  const int C = f.components();
  const std::size_t ns = g.spectral_size();
  return apply_symbol(f, C, [&](std::size_t s, const std::array<int, 3>&, const SpectralField& in,
                                std::vector<cplx>& out) {
    if (!g.in_band(s)) return;
    for (int c = 0; c < C; ++c) out[c * ns + s] = in.spectral()[c * ns + s];
  });
}

SpectralField translate(const SpectralField& f, const Point& shift) {
  const TorusGrid& g = f.grid();
  const int C = f.components();
  const int d = g.dim();
  const std::size_t ns = g.spectral_size();
  SpectralField t = apply_symbol(f, C, [&](std::size_t s, const std::array<int, 3>& k, const SpectralField& in,
                                           std::vector<cplx>& out) {
    double ph = 0.0;
    for (int a = 0; a < d; ++a) ph -= k[a] * shift[a];
    const cplx e = std::polar(1.0, ph);
    for (int c = 0; c < C; ++c) out[c * ns + s] = e * in.spectral()[c * ns + s];
  });
  // Nyquist phases break Hermitian symmetry; resynchronize from physical values.
  return SpectralField::from_physical(g, C, std::vector<double>(t.physical().begin(), t.physical().end()));
}

SpectralField dealiased_from_physical(const TorusGrid& g, int components, std::vector<double> values) {
  if (values.size() != g.size() * static_cast<std::size_t>(components))
    throw InvalidArgument("dealiased_from_physical: size mismatch");
  const std::size_t ns = g.spectral_size();
  std::vector<cplx> spec(ns * components);
  for (int c = 0; c < components; ++c) {
    g.forward(values.data() + c * g.size(), spec.data() + c * ns);
    for (std::size_t s = 0; s < ns; ++s)
      if (!g.in_band(s)) spec[c * ns + s] = cplx{};
  }
  return SpectralField::from_spectral(g, components, std::move(spec));
}

SpectralField multiply(const SpectralField& s, const SpectralField& f) {
  require_scalar(s, "multiply");
  require_same_grid(s, f, "multiply");
  const TorusGrid& g = f.grid();
  const std::size_t n = g.size();
  std::vector<double> v(f.physical().begin(), f.physical().end());
  auto sp = s.physical();
  for (int c = 0; c < f.components(); ++c)
    for (std::size_t i = 0; i < n; ++i) v[c * n + i] *= sp[i];
  return dealiased_from_physical(g, f.components(), std::move(v));
}

double inner_product(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b, "inner_product");
  if (a.components() != b.components()) throw InvalidArgument("inner_product: rank mismatch");
  auto pa = a.physical();
  auto pb = b.physical();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) acc += pa[i] * pb[i];
  return acc * a.grid().cell_volume();
}

double spectral_inner_product(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b, "spectral_inner_product");
  if (a.components() != b.components()) throw InvalidArgument("spectral_inner_product: rank mismatch");
  const TorusGrid& g = a.grid();
  const std::size_t ns = g.spectral_size();
  double acc = 0.0;
  for (int c = 0; c < a.components(); ++c)
    for (std::size_t s = 0; s < ns; ++s) {
      const cplx x = a.spectral()[c * ns + s];
      const cplx y = b.spectral()[c * ns + s];
      acc += g.hermitian_weight(s) * (x.real() * y.real() + x.imag() * y.imag());
    }
  return acc * g.volume();
}

double norm_l2(const SpectralField& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

double max_abs(const SpectralField& f) {
  const TorusGrid& g = f.grid();
  const std::size_t n = g.size();
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int c = 0; c < f.components(); ++c) s += f.physical()[c * n + i] * f.physical()[c * n + i];
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

double mean(const SpectralField& f, int component) { return f.spectral(component)[0].real(); }

double divergence_ratio(const SpectralField& v) {
  const double nv = norm_l2(v);
  if (nv == 0.0) return 0.0;
  return norm_l2(divergence(v)) / nv;
}

SpectralField random_field(const TorusGrid& g, int components, std::uint64_t seed, int kmax, bool solenoidal) {
  const std::size_t ns = g.spectral_size();
  std::vector<cplx> spec(ns * components);
  const std::uint64_t key = derive_seed(seed, 0x52414e44u);
  for (int c = 0; c < components; ++c)
    for (std::size_t s = 0; s < ns; ++s) {
      const auto k = g.wavevector(s);
      int kinf = 0;
      double k2 = 0.0;
      for (int a = 0; a < g.dim(); ++a) {
        kinf = std::max(kinf, std::abs(k[a]));
        k2 += double(k[a]) * k[a];
      }
      if (kinf == 0 || kinf > kmax || g.is_nyquist(s)) continue;
      const auto z = philox_normal_pair(key, s, static_cast<std::uint32_t>(c), 0u);
      spec[c * ns + s] = cplx(z[0], z[1]) / (1.0 + k2);
    }
  // The c2r/r2c round trip makes the kx = 0 plane Hermitian.
  SpectralField raw = SpectralField::from_spectral(g, components, std::move(spec));
  SpectralField f = SpectralField::from_physical(g, components,
                                                 std::vector<double>(raw.physical().begin(), raw.physical().end()));
  if (solenoidal) {
    require_vector(f, "random_field");
    f = leray_project(f);
  }
  return f;
}

// ---------------------------------------------------------------------------

PointSampler::PointSampler(const SpectralField& f) : d_(f.grid().dim()), comps_(f.components()) {
  const TorusGrid& g = f.grid();
  const std::size_t ns = g.spectral_size();
  double cmax = 0.0;
  for (const auto& c : f.spectral()) cmax = std::max(cmax, std::abs(c));
  const double tiny = 1e-15 * cmax;

  bool band = true;
  std::size_t nonzero = 0;
  for (std::size_t s = 0; s < ns; ++s) {
    bool nz = false;
    for (int c = 0; c < comps_; ++c) nz = nz || std::abs(f.spectral()[c * ns + s]) > tiny;
    if (!nz) continue;
    ++nonzero;
    if (!g.in_band(s)) band = false;
  }
  kb_ = band ? g.kmax() : g.n() / 2;
  width_ = 2 * kb_ + 1;

  if (nonzero <= 24) {
    sparse_ = true;
    for (std::size_t s = 0; s < ns; ++s) {
      Mode m;
      m.k = g.wavevector(s);
      m.c.resize(comps_);
      bool nz = false;
      for (int c = 0; c < comps_; ++c) {
        m.c[c] = g.hermitian_weight(s) * f.spectral()[c * ns + s];
        nz = nz || std::abs(f.spectral()[c * ns + s]) > tiny;
      }
      if (nz) modes_.push_back(std::move(m));
    }
    return;
  }

  const std::size_t nx = static_cast<std::size_t>(kb_ + 1);
  const std::size_t ny = static_cast<std::size_t>(width_);
  const std::size_t nz = d_ == 3 ? ny : 1;
  dense_.assign(static_cast<std::size_t>(comps_) * nz * ny * nx, cplx{});
  for (std::size_t s = 0; s < ns; ++s) {
    const auto k = g.wavevector(s);
    if (k[0] > kb_ || std::abs(k[1]) > kb_ || std::abs(k[2]) > kb_) continue;
    // A full-spectrum ky = -n/2 entry maps to index 0 of the shifted range.
    const std::size_t iy = static_cast<std::size_t>(k[1] + kb_);
    const std::size_t iz = d_ == 3 ? static_cast<std::size_t>(k[2] + kb_) : 0;
    for (int c = 0; c < comps_; ++c)
      dense_[((c * nz + iz) * ny + iy) * nx + k[0]] = g.hermitian_weight(s) * f.spectral()[c * ns + s];
  }
}

void PointSampler::sample(const Point& x, double* values, double* grad) const {
  if (sparse_)
    sample_sparse(x, values, grad);
  else
    sample_dense(x, values, grad);
}

void PointSampler::sample_sparse(const Point& x, double* values, double* grad) const {
  for (int c = 0; c < comps_; ++c) values[c] = 0.0;
  if (grad)
    for (int i = 0; i < comps_ * d_; ++i) grad[i] = 0.0;
  for (const auto& m : modes_) {
    double ph = 0.0;
    for (int a = 0; a < d_; ++a) ph += m.k[a] * x[a];
    const cplx e(std::cos(ph), std::sin(ph));
    for (int c = 0; c < comps_; ++c) {
      const cplx t = m.c[c] * e;
      values[c] += t.real();
      if (grad)
        for (int a = 0; a < d_; ++a) grad[c * d_ + a] -= m.k[a] * t.imag();
    }
  }
}

namespace {

void phase_table(double x, int kb, std::vector<cplx>& pos, std::vector<cplx>& sym) {
  pos.resize(kb + 1);
  sym.resize(2 * kb + 1);
  for (int k = 0; k <= kb; ++k) pos[k] = std::polar(1.0, k * x);
  for (int k = -kb; k <= kb; ++k) sym[k + kb] = k >= 0 ? pos[k] : std::conj(pos[-k]);
}

}  // namespace

void PointSampler::sample_dense(const Point& x, double* values, double* grad) const {
  thread_local std::vector<cplx> ex, exs, ey, eys, ez, ezs, S, Sy, Sz;
  phase_table(x[0], kb_, ex, exs);
  phase_table(x[1], kb_, eys, ey);
  if (d_ == 3) phase_table(x[2], kb_, ezs, ez);
  const std::size_t nx = static_cast<std::size_t>(kb_ + 1);
  const std::size_t ny = static_cast<std::size_t>(width_);
  const std::size_t nz = d_ == 3 ? ny : 1;
  S.resize(nx);
  Sy.resize(nx);
  Sz.resize(nx);

  for (int c = 0; c < comps_; ++c) {
    std::fill(S.begin(), S.end(), cplx{});
    std::fill(Sy.begin(), Sy.end(), cplx{});
    std::fill(Sz.begin(), Sz.end(), cplx{});
    for (std::size_t iz = 0; iz < nz; ++iz) {
      const cplx pz = d_ == 3 ? ez[iz] : cplx(1.0, 0.0);
      const double kz = d_ == 3 ? static_cast<double>(static_cast<int>(iz) - kb_) : 0.0;
      for (std::size_t iy = 0; iy < ny; ++iy) {
        const cplx t = ey[iy] * pz;
        const double ky = static_cast<double>(static_cast<int>(iy) - kb_);
        const cplx* row = &dense_[((c * nz + iz) * ny + iy) * nx];
        if (!grad) {
          for (std::size_t kx = 0; kx < nx; ++kx) S[kx] += row[kx] * t;
        } else {
          for (std::size_t kx = 0; kx < nx; ++kx) {
            const cplx v = row[kx] * t;
            S[kx] += v;
            Sy[kx] += ky * v;
            if (d_ == 3) Sz[kx] += kz * v;
          }
        }
      }
    }
    double val = 0.0, gx = 0.0, gy = 0.0, gz = 0.0;
    for (std::size_t kx = 0; kx < nx; ++kx) {
      const cplx e = ex[kx];
      const cplx v = S[kx] * e;
      val += v.real();
      if (grad) {
        gx -= static_cast<double>(kx) * v.imag();
        gy -= (Sy[kx] * e).imag();
        if (d_ == 3) gz -= (Sz[kx] * e).imag();
      }
    }
    values[c] = val;
    if (grad) {
      grad[c * d_ + 0] = gx;
      grad[c * d_ + 1] = gy;
      if (d_ == 3) grad[c * d_ + 2] = gz;
    }
  }
}

std::vector<double> evaluate_at_points(const SpectralField& f, const std::vector<Point>& pts) {
  PointSampler sampler(f);
  const int C = f.components();
  std::vector<double> out(pts.size() * C);
  for (std::size_t p = 0; p < pts.size(); ++p) sampler.sample(pts[p], out.data() + p * C);
  return out;
}

}  // namespace kelvinlab

namespace kelvinlab {

namespace {

std::vector<cplx> real_dft(std::span<const double> v) {
  const int P = static_cast<int>(v.size());
  std::vector<double> in(v.begin(), v.end());
  std::vector<cplx> out(P / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(P, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

std::vector<double> real_idft(std::vector<cplx> c, std::size_t m) {
  std::vector<double> out(m);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(m), reinterpret_cast<fftw_complex*>(c.data()), out.data(),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace

std::vector<double> periodic_derivative(std::span<const double> v) {
  const std::size_t P = v.size();
  if (P < 2) throw InvalidArgument("periodic_derivative: need at least 2 samples");
  auto c = real_dft(v);
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (P % 2 == 0 && k == P / 2)
      c[k] = 0.0;
    else
      c[k] *= cplx(0.0, kTwoPi * static_cast<double>(k) / static_cast<double>(P));
  }
  return real_idft(std::move(c), P);
}

std::vector<double> periodic_resample(std::span<const double> v, std::size_t m) {
  const std::size_t P = v.size();
  if (P < 2 || m < P) throw InvalidArgument("periodic_resample: need m >= P >= 2");
  auto c = real_dft(v);
  std::vector<cplx> d(m / 2 + 1, cplx(0.0));
  for (std::size_t k = 0; k < c.size(); ++k) d[k] = c[k] / static_cast<double>(P);
  if (P % 2 == 0 && m > P) d[P / 2] *= 0.5;
  return real_idft(std::move(d), m);
}

}  // namespace kelvinlab
