#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace swt {

// mt19937_64 is fully specified by the standard; the helpers below replace the
// implementation-defined std:: distributions so streams match across toolchains.
using Rng = std::mt19937_64;

/// FNV-1a over the raw bytes (offset basis 14695981039346656037, prime 1099511628211).
std::uint64_t fnv1a64(std::string_view bytes);

/// Uniform in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), rejection sampling so there is no modulo bias.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Standard normal via Box-Muller (no cached second value).
double standard_normal(Rng& rng);

}  // namespace swt
