#pragma once

#include <string>

#include "kelvinlab/grid.hpp"

namespace kelvinlab {

enum class DumpFormat { binary, csv };

struct FieldHeader {
  int d = 0;
  int n_per_axis = 0;
  int rank = 0;  // number of components
  double time = 0.0;
};

/// First line is a JSON header {d, n_per_axis, rank, time}. Binary dumps are
/// followed by little-endian doubles, component-major with x fastest; CSV
/// dumps by one row per node with one column per component.
void write_field(const std::string& path, const SpectralField& f, double time, DumpFormat format);
SpectralField read_field(const std::string& path, FieldHeader* header = nullptr);

/// Locale-independent 17 significant digit scientific formatting.
std::string format_double(double v);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);
std::string field_digest(const SpectralField& f);

}  // namespace kelvinlab
