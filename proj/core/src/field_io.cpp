#include "kelvinlab/field_io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kelvinlab/error.hpp"

namespace kelvinlab {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string field_digest(const SpectralField& f) {
  auto p = f.physical();
  std::string bytes(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(double));
  bytes += f.grid().describe() + ":" + std::to_string(f.components());
  return sha256_hex(bytes);
}

void write_field(const std::string& path, const SpectralField& f, double time, DumpFormat format) {
  static_assert(std::endian::native == std::endian::little, "binary dumps assume a little-endian host");
  const TorusGrid& g = f.grid();
  nlohmann::ordered_json h;
  h["d"] = g.dim();
  h["n_per_axis"] = g.n();
  h["rank"] = f.components();
  h["time"] = time;
  h["format"] = format == DumpFormat::binary ? "binary" : "csv";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << h.dump() << '\n';
  if (format == DumpFormat::binary) {
    auto p = f.physical();
    os.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
  } else {
    const std::size_t n = g.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < f.components(); ++c) {
        if (c) os << ',';
        os << format_double(f.physical(c)[i]);
      }
      os << '\n';
    }
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

SpectralField read_field(const std::string& path, FieldHeader* header) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open field file " + path);
  std::string line;
  std::getline(is, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw ValidationError("field file " + path + ": bad header: " + e.what());
  }
  FieldHeader fh;
  try {
    fh.d = h.at("d").get<int>();
    fh.n_per_axis = h.at("n_per_axis").get<int>();
    fh.rank = h.at("rank").get<int>();
    fh.time = h.value("time", 0.0);
  } catch (const std::exception& e) {
    throw ValidationError("field file " + path + ": header missing keys: " + e.what());
  }
  const std::string fmt = h.value("format", std::string("binary"));
  TorusGrid g(fh.d, fh.n_per_axis);
  const std::size_t n = g.size();
  std::vector<double> v(n * fh.rank);
  if (fmt == "binary") {
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(v.size() * sizeof(double)))
      throw ValidationError("field file " + path + ": truncated data");
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(is, line)) throw ValidationError("field file " + path + ": truncated data");
      const char* p = line.data();
      const char* end = p + line.size();
      for (int c = 0; c < fh.rank; ++c) {
        double x = 0.0;
        auto r = std::from_chars(p, end, x);
        if (r.ec != std::errc()) throw ValidationError("field file " + path + ": bad number");
        v[c * n + i] = x;
        p = r.ptr;
        if (p < end && *p == ',') ++p;
      }
    }
  }
  if (header) *header = fh;
  return SpectralField::from_physical(g, fh.rank, std::move(v));
}

}  // namespace kelvinlab
