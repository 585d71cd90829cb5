#include "kelvinlab/noise.hpp"

#include <cmath>

#include "kelvinlab/error.hpp"
#include "kelvinlab/field_io.hpp"
#include "kelvinlab/rng.hpp"

namespace kelvinlab {

FamilySpec default_trig_family(int d, double amplitude) {
  FamilySpec f;
  f.kind = BasisKind::trig;
  f.amplitude = amplitude;
  if (d == 2) {
    f.members = {{TrigMode{{1, 0, 0}, {0.0, 1.0, 0.0}, 0.0, 1.0}},
                 {TrigMode{{0, 1, 0}, {1.0, 0.0, 0.0}, 0.0, 1.0}}};
  } else {
    f.members = {{TrigMode{{1, 0, 0}, {0.0, 1.0, 0.0}, 0.0, 1.0}},
                 {TrigMode{{0, 1, 0}, {0.0, 0.0, 1.0}, 0.0, 1.0}},
                 {TrigMode{{0, 0, 1}, {1.0, 0.0, 0.0}, 0.0, 1.0}}};
  }
  return f;
}

FamilySpec swirl_trig_family(double amplitude) {
  FamilySpec f;
  f.kind = BasisKind::trig;
  f.amplitude = amplitude;
  f.members = {{TrigMode{{0, 1, 0}, {1.0, 0.0, 0.0}, 0.0, 1.0}, TrigMode{{1, 0, 0}, {0.0, 1.0, 0.0}, 0.0, 1.0}}};
  return f;
}

SpectralField induced_drift(const std::vector<SpectralField>& xi, const TorusGrid& g) {
  SpectralField acc(g, g.dim());
  for (const auto& x : xi) {
    Jet j = make_jet(x);
    acc.axpy(0.5, directional(j, j));
  }
  return acc;
}

namespace {

NoiseMember make_member(const SpectralField& f) {
  NoiseMember m;
  m.jet = make_jet(f);
  const TorusGrid& g = f.grid();
  const std::size_t ns = g.spectral_size();
  double cmax = 0.0;
  for (const auto& c : f.spectral()) cmax = std::max(cmax, std::abs(c));
  bool constant = true;
  for (int c = 0; c < f.components() && constant; ++c)
    for (std::size_t s = 1; s < ns; ++s)
      if (std::abs(f.spectral()[c * ns + s]) > 1e-14 * cmax) {
        constant = false;
        break;
      }
  m.constant = constant;
  if (constant)
    for (int c = 0; c < f.components(); ++c) m.value[c] = f.spectral()[c * ns].real();
  return m;
}

std::vector<SpectralField> build_family(const TorusGrid& g, const FamilySpec& spec, const char* which) {
  const int d = g.dim();
  std::vector<SpectralField> out;
  switch (spec.kind) {
    case BasisKind::none:
      break;
    case BasisKind::constant_euclidean:
      for (int a = 0; a < d; ++a) {
        std::vector<double> v(d, 0.0);
        v[a] = spec.amplitude;
        out.push_back(SpectralField::constant(g, v));
      }
      break;
    case BasisKind::trig:
      for (std::size_t m = 0; m < spec.members.size(); ++m) {
        for (const auto& mode : spec.members[m]) {
          double kd = 0.0;
          for (int a = 0; a < d; ++a) {
            kd += mode.k[a] * mode.dir[a];
            if (std::abs(mode.k[a]) > g.kmax())
              throw ValidationError(std::string(which) + " member " + std::to_string(m) +
                                    ": wavenumber outside the resolved band");
          }
          if (std::abs(kd) > 1e-12)
            throw ValidationError(std::string(which) + " member " + std::to_string(m) +
                                  ": dir.k must vanish for a solenoidal mode");
        }
        const auto modes = spec.members[m];
        const double amp = spec.amplitude;
        out.push_back(SpectralField::vector(g, [&](const Point& x) {
          Point v{0.0, 0.0, 0.0};
          for (const auto& mode : modes) {
            double ph = mode.phase;
            for (int a = 0; a < d; ++a) ph += mode.k[a] * x[a];
            const double s = amp * mode.amplitude * std::sin(ph);
            for (int a = 0; a < d; ++a) v[a] += s * mode.dir[a];
          }
          return v;
        }));
      }
      break;
    case BasisKind::explicit_files:
      for (std::size_t m = 0; m < spec.files.size(); ++m) {
        SpectralField f = read_field(spec.files[m]);
        if (!(f.grid() == g) || !f.is_vector())
          throw ValidationError(std::string(which) + " member " + std::to_string(m) + " (" + spec.files[m] +
                                "): grid or rank does not match the run grid");
        if (divergence_ratio(f) > 1e-8)
          throw ValidationError(std::string(which) + " member " + std::to_string(m) + " (" + spec.files[m] +
                                "): field is not solenoidal");
        out.push_back(std::move(f));
      }
      break;
  }
  return out;
}

}  // namespace

NoiseBasis::NoiseBasis(const TorusGrid& g, std::vector<SpectralField> xi, std::vector<SpectralField> eta)
    : grid_(g) {
  for (const auto& f : xi) {
    require_vector(f, "NoiseBasis");
    if (!(f.grid() == g)) throw InvalidArgument("NoiseBasis: grid mismatch");
    xi_.push_back(make_member(f));
  }
  for (const auto& f : eta) {
    require_vector(f, "NoiseBasis");
    if (!(f.grid() == g)) throw InvalidArgument("NoiseBasis: grid mismatch");
    eta_.push_back(make_member(f));
  }
  induced_ = kelvinlab::induced_drift(xi, g);
  induced_eta_ = kelvinlab::induced_drift(eta, g);
}

const NoiseMember& NoiseBasis::xi(int k) const {
  if (k < 0 || k >= size_w()) throw InvalidArgument("NoiseBasis: xi channel out of range");
  return xi_[k];
}

const NoiseMember& NoiseBasis::eta(int k) const {
  if (k < 0 || k >= size_b()) throw InvalidArgument("NoiseBasis: eta channel out of range");
  return eta_[k];
}

bool NoiseBasis::xi_constant() const {
  for (const auto& m : xi_)
    if (!m.constant) return false;
  return true;
}

bool NoiseBasis::eta_constant() const {
  for (const auto& m : eta_)
    if (!m.constant) return false;
  return true;
}

std::string NoiseBasis::digest() const {
  std::string s = grid_.describe();
  for (const auto& m : xi_) s += ":w" + field_digest(m.jet.f);
  for (const auto& m : eta_) s += ":b" + field_digest(m.jet.f);
  return sha256_hex(s);
}

NoiseBasis build_basis(const TorusGrid& g, const BasisSpec& spec) {
  return NoiseBasis(g, build_family(g, spec.xi, "xi"), build_family(g, spec.eta, "eta"));
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint32_t kTagW = 0x57u;
constexpr std::uint32_t kTagB = 0x42u;
}  // namespace

BrownianDriver::BrownianDriver(std::uint64_t master_seed, double dt, long n_steps, int channels_w, int channels_b,
                               int refinement)
    : BrownianDriver(from_streams(derive_seed(master_seed, kTagW), derive_seed(master_seed, kTagB), dt, n_steps,
                                  channels_w, channels_b, refinement)) {}

BrownianDriver BrownianDriver::from_streams(std::uint64_t w_seed, std::uint64_t b_seed, double dt, long n_steps,
                                            int channels_w, int channels_b, int refinement) {
  if (!(dt > 0.0)) throw InvalidArgument("BrownianDriver: dt must be positive");
  if (n_steps < 0 || channels_w < 0 || channels_b < 0 || refinement < 1)
    throw InvalidArgument("BrownianDriver: invalid sizes");
  BrownianDriver d;
  d.w_seed_ = w_seed;
  d.b_seed_ = b_seed;
  d.dt_ = dt;
  d.n_steps_ = n_steps;
  d.kw_ = channels_w;
  d.kb_ = channels_b;
  d.refinement_ = refinement;
  return d;
}

double BrownianDriver::increment(std::uint64_t seed, std::uint32_t tag, long step, int channel) const {
  const double sd = std::sqrt(dt_ / refinement_);
  double acc = 0.0;
  const std::uint64_t base = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(refinement_);
  for (int j = 0; j < refinement_; ++j) acc += philox_normal(seed, base + j, static_cast<std::uint32_t>(channel), tag);
  return sd * acc;
}

void BrownianDriver::sample_increments(long step, double* dW, double* dB) const {
  if (step < 0 || step >= n_steps_) throw InvalidArgument("BrownianDriver: step out of range");
  for (int k = 0; k < kw_; ++k) dW[k] = increment(w_seed_, kTagW, step, k);
  for (int k = 0; k < kb_; ++k) dB[k] = increment(b_seed_, kTagB, step, k);
}

std::vector<double> BrownianDriver::dW(long step) const {
  std::vector<double> w(kw_), b(kb_);
  sample_increments(step, w.data(), b.data());
  return w;
}

std::vector<double> BrownianDriver::dB(long step) const {
  std::vector<double> w(kw_), b(kb_);
  sample_increments(step, w.data(), b.data());
  return b;
}

BrownianDriver BrownianDriver::with_b_seed(std::uint64_t b_seed) const {
  BrownianDriver d = *this;
  d.b_seed_ = b_seed;
  return d;
}

std::uint64_t member_b_seed(std::uint64_t b_seed_base, std::uint64_t m) { return derive_seed(b_seed_base, m); }

}  // namespace kelvinlab
