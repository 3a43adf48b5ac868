#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "common/random.hpp"
#include "hecrypt/context.hpp"

namespace polyscore::he {

/// RNS polynomial: component i occupies words [i * degree, (i + 1) * degree).
using Poly = std::vector<std::uint64_t>;

/// A ciphertext with one scalar plaintext in its constant coefficient.
/// Parts are kept in coefficient form.
struct Ciphertext {
  std::shared_ptr<const Context> context;
  std::vector<Poly> parts;
  /// Fixed-point scale of the encrypted integer, tracked through the circuit.
  int scale_bits = 0;
  /// Static (conservative) noise budget estimate in bits.
  double noise_budget = 0.0;

  std::size_t size() const { return parts.size(); }
  const HeParams& params() const { return context->params(); }
};

struct PublicKey {
  std::shared_ptr<const Context> context;
  Poly p0, p1;  // NTT form
};

/// Ternary secret. Only ever held by the client.
struct SecretKey {
  std::shared_ptr<const Context> context;
  std::vector<std::int8_t> s;
  Poly s_ntt;
};

/// Relinearization key: one (k0, k1) pair per RNS component and base-2^w digit.
struct EvalKey {
  std::shared_ptr<const Context> context;
  std::vector<Poly> k0, k1;  // NTT form
};

struct SessionKeys {
  PublicKey pk;
  SecretKey sk;
  EvalKey ek;
};

/// Fresh keys; deterministic for a given seed, entropy-seeded otherwise.
SessionKeys keygen(const HeParams& params, std::optional<std::uint64_t> seed = std::nullopt);

/// Rebuilds the NTT form of a secret from its ternary coefficients.
SecretKey make_secret_key(std::shared_ptr<const Context> context, std::vector<std::int8_t> s);

class Encryptor {
 public:
  explicit Encryptor(PublicKey pk, std::optional<std::uint64_t> seed = std::nullopt);

  /// Encrypts m in [0, t) tagged with the given fixed-point scale.
  Ciphertext encrypt(std::uint64_t m, int scale_bits = 0);
  const PublicKey& public_key() const { return pk_; }

 private:
  PublicKey pk_;
  Rng rng_;
};

class Decryptor {
 public:
  explicit Decryptor(SecretKey sk);

  /// Throws BudgetExhausted when the known zero coefficients do not decrypt
  /// to zero (or, in test mode, when the measured budget is gone).
  std::uint64_t decrypt(const Ciphertext& ct) const;
  /// Constant coefficient with no validity checks; for diagnostics only.
  std::uint64_t decrypt_unchecked(const Ciphertext& ct) const;
  /// Exact invariant-noise budget in bits: -log2(2 |v|). Needs the secret.
  double measured_budget(const Ciphertext& ct) const;

 private:
  Poly phase(const Ciphertext& ct) const;
  SecretKey sk_;
  Poly s2_ntt_;
};

/// Tally of homomorphic operations, for checking which operations a circuit uses.
struct OpCounts {
  std::atomic<std::uint64_t> add{0}, add_plain{0}, mul_plain{0}, mul{0}, relinearize{0};
  void reset();
};

/// Server-side operations. Holds no secret material.
class Evaluator {
 public:
  explicit Evaluator(std::shared_ptr<const Context> context, std::shared_ptr<const EvalKey> ek = nullptr);

  const Context& context() const { return *context_; }
  const HeParams& params() const { return context_->params(); }
  void set_counter(OpCounts* counter) { counter_ = counter; }

  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const;
  /// Adds the plaintext p (mod t) at the ciphertext's scale.
  Ciphertext add_plain(const Ciphertext& a, std::uint64_t p) const;
  /// Multiplies by the plaintext p (mod t) whose fixed-point scale is `plain_scale_bits`.
  Ciphertext mul_plain(const Ciphertext& a, std::uint64_t p, int plain_scale_bits = 0) const;
  /// Tensor product; the result has three parts until relinearized.
  Ciphertext mul(const Ciphertext& a, const Ciphertext& b) const;
  Ciphertext relinearize(const Ciphertext& c) const;
  /// relinearize(mul(a, a)) with the shared operand transformed once.
  Ciphertext square(const Ciphertext& a) const;
  /// sum_j w_j x_j + bias in one pass; counts as the equivalent plain
  /// multiplications and additions.
  Ciphertext dot_plain(std::span<const Ciphertext* const> xs, std::span<const std::uint64_t> weights,
                       std::uint64_t bias, int plain_scale_bits) const;

 private:
  void check(const Ciphertext& c) const;
  Ciphertext tensor(const Ciphertext& a, const Ciphertext* b) const;
  void count(std::atomic<std::uint64_t> OpCounts::*field, std::uint64_t n = 1) const;

  std::shared_ptr<const Context> context_;
  std::shared_ptr<const EvalKey> ek_;
  OpCounts* counter_ = nullptr;
};

/// round(v * 2^scale_bits) mod t; throws Overflow beyond t/2.
std::uint64_t encode_fixed(double v, int scale_bits, std::uint64_t t);
/// Centered m divided by 2^scale_bits.
double decode_fixed(std::uint64_t m, int scale_bits, std::uint64_t t);

}  // namespace polyscore::he
