#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kelvinlab/grid.hpp"
#include "kelvinlab/lie.hpp"

namespace kelvinlab {

/// One trigonometric term: amplitude * dir * sin(k.x + phase). dir.k must vanish.
struct TrigMode {
  std::array<int, 3> k{0, 0, 0};
  std::array<double, 3> dir{0.0, 0.0, 0.0};
  double phase = 0.0;
  double amplitude = 1.0;
};

enum class BasisKind { none, constant_euclidean, trig, explicit_files };

struct FamilySpec {
  BasisKind kind = BasisKind::none;
  double amplitude = 0.1;
  std::vector<std::vector<TrigMode>> members;  // trig: one list of modes per member
  std::vector<std::string> files;              // explicit: one field dump per member
};

struct BasisSpec {
  FamilySpec xi;
  FamilySpec eta;
};

/// Default test basis {a(0, sin x), a(sin y, 0)} (2D) or its 3D analogue.
FamilySpec default_trig_family(int d, double amplitude);
/// Single member a(sin y, sin x) which has a nonzero induced drift.
FamilySpec swirl_trig_family(double amplitude);

struct NoiseMember {
  Jet jet;
  bool constant = false;
  Point value{0.0, 0.0, 0.0};  // valid when constant
};

class NoiseBasis {
 public:
  NoiseBasis() = default;
  NoiseBasis(const TorusGrid& g, std::vector<SpectralField> xi, std::vector<SpectralField> eta);

  const TorusGrid& grid() const { return grid_; }
  int size_w() const { return static_cast<int>(xi_.size()); }
  int size_b() const { return static_cast<int>(eta_.size()); }
  const NoiseMember& xi(int k) const;
  const NoiseMember& eta(int k) const;
  const std::vector<NoiseMember>& xi_members() const { return xi_; }
  const std::vector<NoiseMember>& eta_members() const { return eta_; }
  /// 1/2 sum_k (xi_k . grad) xi_k
  const SpectralField& induced_drift() const { return induced_; }
  /// 1/2 sum_k (eta_k . grad) eta_k
  const SpectralField& induced_drift_eta() const { return induced_eta_; }
  bool xi_constant() const;
  bool eta_constant() const;
  std::string digest() const;

 private:
  TorusGrid grid_;
  std::vector<NoiseMember> xi_;
  std::vector<NoiseMember> eta_;
  SpectralField induced_;
  SpectralField induced_eta_;
};

SpectralField induced_drift(const std::vector<SpectralField>& xi, const TorusGrid& g);

NoiseBasis build_basis(const TorusGrid& g, const BasisSpec& spec);

/// Seeded Gaussian increments for channels W (K_W) and B (K_B).
///
/// Increments live on a fine mesh of step dt / refinement; a coarse increment
/// is the sum of its fine increments, so drivers that differ only in
/// refinement sample the same Brownian path.
class BrownianDriver {
 public:
  BrownianDriver() = default;
  BrownianDriver(std::uint64_t master_seed, double dt, long n_steps, int channels_w, int channels_b,
                 int refinement = 1);

  static BrownianDriver from_streams(std::uint64_t w_seed, std::uint64_t b_seed, double dt, long n_steps,
                                     int channels_w, int channels_b, int refinement = 1);

  double dt() const { return dt_; }
  long n_steps() const { return n_steps_; }
  int channels_w() const { return kw_; }
  int channels_b() const { return kb_; }
  int refinement() const { return refinement_; }
  std::uint64_t w_seed() const { return w_seed_; }
  std::uint64_t b_seed() const { return b_seed_; }

  void sample_increments(long step, double* dW, double* dB) const;
  std::vector<double> dW(long step) const;
  std::vector<double> dB(long step) const;

  /// Same W stream, different B stream.
  BrownianDriver with_b_seed(std::uint64_t b_seed) const;

  friend bool operator==(const BrownianDriver& a, const BrownianDriver& b) {
    return a.w_seed_ == b.w_seed_ && a.b_seed_ == b.b_seed_ && a.dt_ == b.dt_ && a.n_steps_ == b.n_steps_ &&
           a.kw_ == b.kw_ && a.kb_ == b.kb_ && a.refinement_ == b.refinement_;
  }

 private:
  double increment(std::uint64_t seed, std::uint32_t tag, long step, int channel) const;

  std::uint64_t w_seed_ = 0;
  std::uint64_t b_seed_ = 0;
  double dt_ = 0.0;
  long n_steps_ = 0;
  int kw_ = 0;
  int kb_ = 0;
  int refinement_ = 1;
};

/// B-stream seed of ensemble member m.
std::uint64_t member_b_seed(std::uint64_t b_seed_base, std::uint64_t m);

}  // namespace kelvinlab
