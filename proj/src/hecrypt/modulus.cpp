#include "hecrypt/modulus.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace polyscore::he {

Modulus::Modulus(std::uint64_t q) : q_(q) {
  require(q >= 2 && q < (std::uint64_t{1} << 61), ErrorCode::InvalidArgument, "modulus must lie in [2, 2^61)");
  // (2^128 - 1) / q differs from 2^128 / q only when q is a power of two, and
  // then by one, which the final correction loop absorbs.
  const u128 all = ~static_cast<u128>(0);
  const u128 r = all / q;
  r_hi_ = static_cast<std::uint64_t>(r >> 64);
  r_lo_ = static_cast<std::uint64_t>(r);
  bits_ = 64 - __builtin_clzll(q);
  mu_ = static_cast<std::uint64_t>((static_cast<u128>(1) << (2 * bits_)) / q);
}

std::uint64_t Modulus::pow(std::uint64_t base, std::uint64_t exp) const {
  std::uint64_t r = 1 % q_;
  base = reduce(base);
  while (exp) {
    if (exp & 1) r = mul(r, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return r;
}

std::uint64_t Modulus::inverse(std::uint64_t a) const {
  // extended Euclid on signed 128-bit values
  __int128 t = 0, new_t = 1;
  __int128 r = q_, new_r = reduce(a);
  require(new_r != 0, ErrorCode::InvalidArgument, "zero has no modular inverse");
  while (new_r != 0) {
    const __int128 quot = r / new_r;
    const __int128 tmp_t = t - quot * new_t;
    t = new_t;
    new_t = tmp_t;
    const __int128 tmp_r = r - quot * new_r;
    r = new_r;
    new_r = tmp_r;
  }
  require(r == 1, ErrorCode::InvalidArgument, "value is not invertible modulo q");
  if (t < 0) t += q_;
  return static_cast<std::uint64_t>(t);
}

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // These bases are deterministic for every 64-bit n.
  for (std::uint64_t a : {2ULL, 325ULL, 9375ULL, 28178ULL, 450775ULL, 9780504ULL, 1795265022ULL}) {
    std::uint64_t x = mod_pow(a % n, d, n);
    if (a % n == 0 || x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mod_mul(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

std::vector<std::uint64_t> find_primes(int bits, std::uint64_t step, std::size_t count,
                                       const std::vector<std::uint64_t>& exclude) {
  require(bits >= 2 && bits <= 61, ErrorCode::InvalidArgument, "prime size must lie in [2, 61] bits");
  require(step >= 1, ErrorCode::InvalidArgument, "prime step must be positive");
  std::vector<std::uint64_t> out;
  const std::uint64_t top = (std::uint64_t{1} << bits) - 1;
  std::uint64_t p = top - ((top - 1) % step);  // largest value = 1 (mod step) not above top
  while (out.size() < count) {
    require(p > step, ErrorCode::InvalidArgument, "ran out of primes of the requested form");
    if (is_prime(p) && std::find(exclude.begin(), exclude.end(), p) == exclude.end()) out.push_back(p);
    p -= step;
  }
  return out;
}

std::uint64_t primitive_root_of_unity(std::uint64_t order, const Modulus& q) {
  const std::uint64_t qv = q.value();
  require(order >= 2 && (qv - 1) % order == 0, ErrorCode::InvalidArgument, "order does not divide q - 1");
  // order is a power of two here; g^((q-1)/order) has exact order `order` iff its order/2 power is -1.
  for (std::uint64_t g = 2; g < qv; ++g) {
    const std::uint64_t root = q.pow(g, (qv - 1) / order);
    if (q.pow(root, order / 2) == qv - 1) return root;
  }
  raise(ErrorCode::InvalidArgument, "no primitive root of unity found");
}

}  // namespace polyscore::he
