#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace kelvinlab {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// Every draw is a pure function of (key, counter), which is what makes
// increments order independent.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter round(Counter c, Key k) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  static Counter generate(Counter c, Key k) {
    c = round(c, k);
    for (int r = 1; r < 10; ++r) {
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
      c = round(c, k);
    }
    return c;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derive an independent 64-bit seed from a parent seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
  return splitmix64(splitmix64(parent) ^ splitmix64(tag + 0x632BE59BD9B4E019ull));
}

/// Two standard normals from one Philox block (Box-Muller on 53-bit uniforms).
inline std::array<double, 2> philox_normal_pair(std::uint64_t seed, std::uint64_t index,
                                                std::uint32_t channel, std::uint32_t tag) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                                channel, tag};
  const auto r = Philox4x32::generate(ctr, key);
  const std::uint64_t a = (std::uint64_t{r[0]} << 32) | r[1];
  const std::uint64_t b = (std::uint64_t{r[2]} << 32) | r[3];
  const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(th), rad * std::sin(th)};
}

/// Standard normal number `index` of the stream (seed, channel, tag).
inline double philox_normal(std::uint64_t seed, std::uint64_t index, std::uint32_t channel, std::uint32_t tag) {
  return philox_normal_pair(seed, index / 2, channel, tag)[index % 2];
}

}  // namespace kelvinlab
