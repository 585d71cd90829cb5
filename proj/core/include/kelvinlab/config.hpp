#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kelvinlab/field_io.hpp"
#include "kelvinlab/integrator.hpp"
#include "kelvinlab/lagrangian.hpp"
#include "kelvinlab/model.hpp"
#include "kelvinlab/noise.hpp"

namespace kelvinlab {

struct GridConfig {
  int d = 2;
  int n_per_axis = 64;
  double dealias = 2.0 / 3.0;
};

enum class InitialKind { random, file, shear, abc };

struct InitialConfig {
  InitialKind kind = InitialKind::random;
  std::uint64_t seed = 7;
  int kmax = 3;
  double amplitude = 1.0;  // target max |u| for random fields, prefactor otherwise
  std::string file;
};

struct TimeConfig {
  double T = 0.2;
  double dt = 1e-3;
  int save_stride = 1;
  Scheme scheme = Scheme::strat_heun;
};

struct SeedConfig {
  std::uint64_t master = 1;
  std::optional<std::uint64_t> w;
  std::optional<std::uint64_t> b_base;
};

enum class SweepKind { dt_halving, m_scaling, amplitude };

std::string to_string(SweepKind k);
SweepKind sweep_kind_from_string(const std::string& s);

struct SweepConfig {
  SweepKind kind = SweepKind::dt_halving;
  std::vector<double> points;  // dt values, member counts or amplitudes
  std::string metric = "kelvin";
  int paths = 1;  // W paths averaged per point (dt and amplitude sweeps)
};

struct DiagnosticsConfig {
  std::vector<std::string> which;
  std::vector<LoopSpec> loops;
  Flavor flavor = Flavor::strat;
  std::size_t M = 256;
  int label_n = 32;
  double steepening_bound = 50.0;
  double tolerance = 0.0;  // check threshold for residual subcommands; 0 uses the built-in default
  SweepConfig sweep;
};

struct OutputConfig {
  std::string directory;
  bool csv = true;
  bool json = true;
  DumpFormat field_format = DumpFormat::binary;
  bool dump_fields = false;
};

struct RunConfig {
  GridConfig grid;
  ModelSpec model;
  BasisSpec basis;
  InitialConfig initial;
  TimeConfig time;
  SeedConfig seeds;
  DiagnosticsConfig diagnostics;
  OutputConfig output;
  std::string source;  // path the config was read from

  std::uint64_t w_seed() const;
  std::uint64_t b_seed() const;
  std::uint64_t b_seed_base() const;
};

/// Parses a YAML run configuration. Unknown keys, missing required keys and
/// type mismatches raise ConfigError naming the key and line; out-of-range
/// values raise ConfigError too.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_string(const std::string& text, const std::string& source = "<string>");

/// Fully resolved configuration as canonical JSON text (sorted keys).
std::string resolved_config_json(const RunConfig& cfg);

}  // namespace kelvinlab
