#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "common/bytes.hpp"
#include "hecrypt/bfv.hpp"

namespace polyscore::he {

inline constexpr std::uint32_t kCiphertextMagic = 0x54435350;  // "PSCT"
inline constexpr std::uint32_t kPublicKeyMagic = 0x4b505350;   // "PSPK"
inline constexpr std::uint32_t kSecretKeyMagic = 0x4b535350;   // "PSSK"
inline constexpr std::uint32_t kEvalKeyMagic = 0x4b455350;     // "PSEK"
inline constexpr std::uint16_t kFormatVersion = 1;

void write_params(ByteWriter& w, const HeParams& p);
HeParams read_params(ByteReader& r);

/// Header (magic, version, backend, n, moduli count, size, scale bits, noise
/// budget) followed by the coefficient words, all little-endian.
void write_ciphertext(ByteWriter& w, const Ciphertext& ct);
Ciphertext read_ciphertext(ByteReader& r, std::shared_ptr<const Context> context);
std::vector<std::uint8_t> serialize(const Ciphertext& ct);
Ciphertext deserialize_ciphertext(std::span<const std::uint8_t> bytes, std::shared_ptr<const Context> context);

std::vector<std::uint8_t> serialize(const PublicKey& pk);
std::vector<std::uint8_t> serialize(const SecretKey& sk);
std::vector<std::uint8_t> serialize(const EvalKey& ek);
PublicKey deserialize_public_key(std::span<const std::uint8_t> bytes);
SecretKey deserialize_secret_key(std::span<const std::uint8_t> bytes);
EvalKey deserialize_eval_key(std::span<const std::uint8_t> bytes);

}  // namespace polyscore::he
