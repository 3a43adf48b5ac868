#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "hecrypt/modulus.hpp"
#include "hecrypt/ntt.hpp"
#include "hecrypt/params.hpp"

namespace polyscore::he {

/// Residue-number-system layout of a polynomial: `count` components of n
/// words each, component i holding the coefficients mod the i-th prime.
class RnsBase {
 public:
  RnsBase() = default;
  /// NTT tables are built only when n >= 2.
  RnsBase(std::size_t n, const std::vector<std::uint64_t>& primes);

  std::size_t size() const { return moduli_.size(); }
  const Modulus& modulus(std::size_t i) const { return moduli_[i]; }
  const NttTables& ntt(std::size_t i) const { return *ntt_[i]; }
  const std::vector<std::uint64_t>& primes() const { return primes_; }

  void forward(std::uint64_t* poly) const;
  void inverse(std::uint64_t* poly) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> primes_;
  std::vector<Modulus> moduli_;
  std::vector<std::shared_ptr<const NttTables>> ntt_;
};

/// Fast base conversion from `from` to `to` with the floating-point
/// correction that makes it exact for the centered lift.
class BaseConverter {
 public:
  BaseConverter() = default;
  BaseConverter(const RnsBase& from, const RnsBase& to);
  /// x in `from` (coefficient form) -> centered lift of x reduced in `to`.
  void convert(const std::uint64_t* in, std::uint64_t* out, std::size_t n) const;

 private:
  const RnsBase* from_ = nullptr;
  const RnsBase* to_ = nullptr;
  std::vector<std::uint64_t> hat_inv_, hat_inv_shoup_;  // (F/f_i)^-1 mod f_i
  std::vector<long double> inv_;                        // 1/f_i
  std::vector<std::uint64_t> hat_mod_;                  // (F/f_i) mod g_j, [i * to + j]
  std::vector<std::uint64_t> prod_mod_;                 // F mod g_j
};

/// Immutable per-parameter precomputation shared by every key and ciphertext
/// using those parameters. Obtain through `Context::get`.
class Context {
 public:
  static std::shared_ptr<const Context> get(const HeParams& params);
  explicit Context(const HeParams& params);
  Context(const Context&) = delete;
  Context& operator=(const Context&) = delete;

  const HeParams& params() const { return params_; }
  bool simulated() const { return params_.backend == Backend::Sim; }
  /// Words per ring component (1 on the simulation backend).
  std::size_t degree() const { return degree_; }
  const RnsBase& q() const { return q_; }
  const RnsBase& p() const { return p_; }
  std::size_t words() const { return degree_ * q_.size(); }
  const NoiseModel& noise() const { return noise_; }

  /// round(q * m / t) for m in [0, t), as residues mod each q_i.
  void add_scaled_message(std::uint64_t m, std::uint64_t* poly) const;

  /// Tensor support: x in Q, coefficient form -> residues in P.
  void extend_q_to_p(const std::uint64_t* q_part, std::uint64_t* p_part) const {
    q_to_p_.convert(q_part, p_part, degree_);
  }
  /// (x_Q, x_P) exact representation of x -> round(t * x / q) in P.
  void scale_and_round(const std::uint64_t* q_part, const std::uint64_t* p_part, std::uint64_t* out_p) const;
  void p_to_q(const std::uint64_t* p_part, std::uint64_t* q_part) const { p_to_q_.convert(p_part, q_part, degree_); }

  /// [x_i * (q/q_i)^-1]_{q_i}: the RNS digit of component i.
  std::uint64_t rns_digit(std::size_t i, std::uint64_t x) const {
    return q_.modulus(i).mul_shoup(x, qhat_inv_[i], qhat_inv_shoup_[i]);
  }
  /// (q/q_i) mod q_i.
  std::uint64_t qhat_mod(std::size_t i) const { return qhat_mod_self_[i]; }
  /// Digits of base 2^w needed to cover q_i.
  std::size_t digit_count(std::size_t i) const { return digit_counts_[i]; }

  /// round(t * x / q) mod t for one coefficient given its residues (stride = degree).
  std::uint64_t decode_coefficient(const std::uint64_t* residues, std::size_t stride) const;
  /// Invariant noise |t * x / q - m| as log2 (exact, bignum); -inf for zero noise.
  double invariant_noise_log2(const std::vector<std::uint64_t>& x) const;

 private:
  HeParams params_;
  std::size_t degree_ = 0;
  RnsBase q_, p_;
  BaseConverter q_to_p_, p_to_q_;
  NoiseModel noise_;
  std::vector<std::uint64_t> qhat_inv_, qhat_inv_shoup_, qhat_mod_self_;
  std::vector<std::size_t> digit_counts_;
  // encoding
  std::vector<std::uint64_t> delta_mod_q_;  // floor(q/t) mod q_i
  std::uint64_t q_mod_t_ = 0;
  // scale and round
  std::vector<std::uint64_t> omega_, omega_shoup_;  // (QP/q_i)^-1 mod q_i
  std::vector<std::uint64_t> int_part_mod_p_;       // floor(t P / q_i) mod p_j, [i * l + j]
  std::vector<std::uint64_t> frac_part_;            // frac(t P / q_i) * 2^64
  std::vector<std::uint64_t> t_qinv_mod_p_, t_qinv_mod_p_shoup_;
  // decoding: t mod q_i, q_i^-1 mod 2^128, floor(2^128 / q_i) as (hi, lo)
  std::vector<std::uint64_t> t_mod_q_;
  std::vector<u128> q_inv_2_128_;
  std::vector<std::uint64_t> recip_hi_, recip_lo_;
  // exact fallbacks
  struct BigConstants;
  std::shared_ptr<const BigConstants> big_;
};

/// True when POLYSCORE_TEST_MODE=1: decryption also measures the exact invariant noise.
bool test_mode();

}  // namespace polyscore::he
