#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hecrypt/modulus.hpp"

namespace polyscore::he {

/// Negacyclic number-theoretic transform over Z_q[X]/(X^n + 1), q = 1 (mod 2n).
/// Forward output is in bit-reversed evaluation order; pointwise products of
/// two transforms invert to the negacyclic convolution.
class NttTables {
 public:
  NttTables(std::size_t n, const Modulus& q);

  std::size_t n() const { return n_; }
  const Modulus& modulus() const { return q_; }

  void forward(std::uint64_t* a) const;
  void inverse(std::uint64_t* a) const;
  void forward(std::span<std::uint64_t> a) const { forward(a.data()); }
  void inverse(std::span<std::uint64_t> a) const { inverse(a.data()); }

 private:
  std::size_t n_;
  int log_n_;
  Modulus q_;
  std::vector<std::uint64_t> psi_, psi_shoup_;          // bit-reversed powers of psi
  std::vector<std::uint64_t> psi_inv_, psi_inv_shoup_;  // bit-reversed powers of psi^-1
  std::uint64_t n_inv_ = 0, n_inv_shoup_ = 0;
};

/// c = a * b in Z_q[X]/(X^n + 1) through the transform.
std::vector<std::uint64_t> negacyclic_multiply(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                               const NttTables& tables);

}  // namespace polyscore::he
