#pragma once

#include <cmath>
#include <cstdint>

namespace polyscore {

using u128 = unsigned __int128;

// Reference modular arithmetic on 64-bit words. Deliberately plain (division
// based); the HE backend has its own reduction code.
inline std::uint64_t mod_add(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  const std::uint64_t s = a + b;
  return (s >= m || s < a) ? s - m : s;
}

inline std::uint64_t mod_sub(std::uint64_t a, std::uint64_t b, std::uint64_t m) { return a >= b ? a - b : a + (m - b); }

inline std::uint64_t mod_mul(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % m);
}

inline std::uint64_t mod_pow(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  base %= m;
  while (exp) {
    if (exp & 1) r = mod_mul(r, base, m);
    base = mod_mul(base, base, m);
    exp >>= 1;
  }
  return r;
}

/// Signed integer to its residue in [0, m).
inline std::uint64_t to_residue(std::int64_t v, std::uint64_t m) {
  if (v >= 0) return static_cast<std::uint64_t>(v) % m;
  const std::uint64_t r = static_cast<std::uint64_t>(-(v + 1)) % m;  // avoids overflow on INT64_MIN
  return m - 1 - r;
}

/// Residue in [0, m) to the centered representative in (-m/2, m/2].
inline std::int64_t centered(std::uint64_t r, std::uint64_t m) {
  return r > m / 2 ? -static_cast<std::int64_t>(m - r) : static_cast<std::int64_t>(r);
}

/// An integer-valued double (any magnitude) reduced into [0, m). fmod is exact.
inline std::uint64_t real_integer_residue(double integral, std::uint64_t m) {
  double r = std::fmod(integral, static_cast<double>(m));
  if (r < 0) r += static_cast<double>(m);
  auto out = static_cast<std::uint64_t>(r);
  return out >= m ? out - m : out;
}

}  // namespace polyscore
