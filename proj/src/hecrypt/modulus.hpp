#pragma once

#include <cstdint>
#include <vector>

#include "common/modmath.hpp"

namespace polyscore::he {

/// A word-sized modulus (< 2^61) with precomputed Barrett constant
/// floor(2^128 / q) for fast reduction of 128-bit products.
class Modulus {
 public:
  Modulus() = default;
  explicit Modulus(std::uint64_t q);

  std::uint64_t value() const { return q_; }
  int bit_count() const { return bits_; }

  std::uint64_t reduce(u128 x) const {
    // q < 2^61 so the quotient estimate is off by at most 2.
    const auto x_lo = static_cast<std::uint64_t>(x);
    const auto x_hi = static_cast<std::uint64_t>(x >> 64);
    const u128 t1 = static_cast<u128>(x_lo) * r_hi_;
    const u128 t2 = static_cast<u128>(x_hi) * r_lo_;
    const u128 mid = (static_cast<u128>(x_lo) * r_lo_ >> 64) + static_cast<std::uint64_t>(t1) + static_cast<std::uint64_t>(t2);
    const std::uint64_t quot = x_hi * r_hi_ + static_cast<std::uint64_t>(t1 >> 64) + static_cast<std::uint64_t>(t2 >> 64) +
                               static_cast<std::uint64_t>(mid >> 64);
    std::uint64_t r = x_lo - quot * q_;
    while (r >= q_) r -= q_;
    return r;
  }

  std::uint64_t reduce(std::uint64_t x) const { return x >= q_ ? x % q_ : x; }

  /// a * b mod q for a, b < q: Barrett on the 2b-bit product with a one-word constant.
  std::uint64_t mul(std::uint64_t a, std::uint64_t b) const {
    const u128 x = static_cast<u128>(a) * b;
    const auto x1 = static_cast<std::uint64_t>(x >> (bits_ - 2));
    const auto quot = static_cast<std::uint64_t>((static_cast<u128>(x1) * mu_) >> (bits_ + 2));
    std::uint64_t r = static_cast<std::uint64_t>(x) - quot * q_;
    while (r >= q_) r -= q_;
    return r;
  }
  std::uint64_t add(std::uint64_t a, std::uint64_t b) const {
    const std::uint64_t s = a + b;
    return s >= q_ ? s - q_ : s;
  }
  std::uint64_t sub(std::uint64_t a, std::uint64_t b) const { return a >= b ? a - b : a + q_ - b; }
  std::uint64_t neg(std::uint64_t a) const { return a == 0 ? 0 : q_ - a; }
  std::uint64_t pow(std::uint64_t base, std::uint64_t exp) const;
  std::uint64_t inverse(std::uint64_t a) const;

  /// Shoup precomputation floor(w * 2^64 / q) for a fixed multiplicand w < q.
  std::uint64_t shoup(std::uint64_t w) const { return static_cast<std::uint64_t>((static_cast<u128>(w) << 64) / q_); }

  /// a * w mod q given w' = shoup(w); result in [0, q).
  std::uint64_t mul_shoup(std::uint64_t a, std::uint64_t w, std::uint64_t w_shoup) const {
    const auto hi = static_cast<std::uint64_t>(static_cast<u128>(a) * w_shoup >> 64);
    std::uint64_t r = a * w - hi * q_;
    return r >= q_ ? r - q_ : r;
  }

  /// Same as mul_shoup but leaves the result in [0, 2q).
  std::uint64_t mul_shoup_lazy(std::uint64_t a, std::uint64_t w, std::uint64_t w_shoup) const {
    const auto hi = static_cast<std::uint64_t>(static_cast<u128>(a) * w_shoup >> 64);
    return a * w - hi * q_;
  }

  /// Signed integer to its residue.
  std::uint64_t from_signed(std::int64_t v) const {
    if (v >= 0) return static_cast<std::uint64_t>(v) < q_ ? static_cast<std::uint64_t>(v) : reduce(static_cast<std::uint64_t>(v));
    if (v > -static_cast<std::int64_t>(q_)) return q_ - static_cast<std::uint64_t>(-v);
    return to_residue(v, q_);
  }

  friend bool operator==(const Modulus& a, const Modulus& b) { return a.q_ == b.q_; }

 private:
  std::uint64_t q_ = 0;
  std::uint64_t r_hi_ = 0, r_lo_ = 0;
  std::uint64_t mu_ = 0;  // floor(2^(2 bits) / q)
  int bits_ = 0;
};

bool is_prime(std::uint64_t n);

/// `count` distinct primes p < 2^bits with p = 1 (mod modulus_step), largest first,
/// skipping any in `exclude`.
std::vector<std::uint64_t> find_primes(int bits, std::uint64_t modulus_step, std::size_t count,
                                       const std::vector<std::uint64_t>& exclude = {});

/// A primitive root of unity of order `order` modulo prime q (order | q-1).
std::uint64_t primitive_root_of_unity(std::uint64_t order, const Modulus& q);

}  // namespace polyscore::he
