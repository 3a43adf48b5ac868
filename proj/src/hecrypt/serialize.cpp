#include "hecrypt/serialize.hpp"

#include <cmath>

#include "common/error.hpp"

namespace polyscore::he {

namespace {

void header(ByteWriter& w, std::uint32_t magic) {
  w.u32(magic);
  w.u16(kFormatVersion);
}

void expect_header(ByteReader& r, std::uint32_t magic) {
  const std::uint32_t found = r.u32();
  require(found != kSecretKeyMagic || magic == kSecretKeyMagic, ErrorCode::KeyConfinement,
          "refusing to read a secret key where public material was expected");
  r.check(found == magic, "bad magic");
  r.check(r.u16() == kFormatVersion, "unsupported format version");
}

void read_poly(ByteReader& r, const Context& ctx, Poly& out) {
  out.resize(ctx.words());
  r.words(out.data(), out.size());
  const std::size_t n = ctx.degree();
  for (std::size_t i = 0; i < ctx.q().size(); ++i)
    for (std::size_t c = 0; c < n; ++c) r.check(out[i * n + c] < ctx.q().modulus(i).value(), "coefficient out of range");
}

}  // namespace

void write_params(ByteWriter& w, const HeParams& p) {
  w.str(p.name);
  w.u8(static_cast<std::uint8_t>(p.backend));
  w.u32(static_cast<std::uint32_t>(p.n));
  w.u64(p.t);
  w.f64(p.error_stddev);
  w.u32(static_cast<std::uint32_t>(p.decomposition_base_bits));
  w.u32(static_cast<std::uint32_t>(p.moduli.size()));
  w.words(p.moduli);
}

HeParams read_params(ByteReader& r) {
  HeParams p;
  p.name = r.str(256);
  const auto backend = r.u8();
  r.check(backend <= 1, "unknown backend");
  p.backend = static_cast<Backend>(backend);
  p.n = r.u32();
  p.t = r.u64();
  p.error_stddev = r.f64();
  p.decomposition_base_bits = static_cast<int>(r.u32());
  const auto count = r.u32();
  r.check(count >= 1 && count <= 64, "implausible modulus count");
  p.moduli.resize(count);
  r.words(p.moduli.data(), count);
  r.check(p.n <= (std::size_t{1} << 17), "ring degree too large");
  try {
    p.validate();
  } catch (const Error& e) {
    r.fail(std::string("invalid parameters (") + e.what() + ")");
  }
  return p;
}

void write_ciphertext(ByteWriter& w, const Ciphertext& ct) {
  const auto& ctx = *ct.context;
  header(w, kCiphertextMagic);
  w.u8(static_cast<std::uint8_t>(ctx.params().backend));
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(ctx.degree()));
  w.u32(static_cast<std::uint32_t>(ctx.q().size()));
  w.u32(static_cast<std::uint32_t>(ct.size()));
  w.i32(ct.scale_bits);
  w.f64(ct.noise_budget);
  for (const auto& part : ct.parts) w.words(part);
}

Ciphertext read_ciphertext(ByteReader& r, std::shared_ptr<const Context> context) {
  expect_header(r, kCiphertextMagic);
  const auto& ctx = *context;
  r.check(r.u8() == static_cast<std::uint8_t>(ctx.params().backend), "backend does not match the session");
  r.u8();
  r.check(r.u32() == ctx.degree(), "ring degree does not match the session");
  r.check(r.u32() == ctx.q().size(), "modulus count does not match the session");
  const auto size = r.u32();
  r.check(size == 2 || size == 3, "ciphertext must have two or three parts");
  Ciphertext ct;
  ct.context = context;
  ct.scale_bits = r.i32();
  r.check(ct.scale_bits >= 0 && ct.scale_bits <= 4096, "implausible scale");
  ct.noise_budget = r.f64();
  r.check(std::isfinite(ct.noise_budget) && ct.noise_budget >= 0.0, "invalid noise budget");
  ct.parts.resize(size);
  for (auto& part : ct.parts) read_poly(r, ctx, part);
  return ct;
}

std::vector<std::uint8_t> serialize(const Ciphertext& ct) {
  ByteWriter w;
  write_ciphertext(w, ct);
  return w.take();
}

Ciphertext deserialize_ciphertext(std::span<const std::uint8_t> bytes, std::shared_ptr<const Context> context) {
  ByteReader r(bytes, ErrorCode::Io, "ciphertext");
  auto ct = read_ciphertext(r, std::move(context));
  r.expect_done();
  return ct;
}

std::vector<std::uint8_t> serialize(const PublicKey& pk) {
  ByteWriter w;
  header(w, kPublicKeyMagic);
  write_params(w, pk.context->params());
  w.words(pk.p0);
  w.words(pk.p1);
  return w.take();
}

std::vector<std::uint8_t> serialize(const SecretKey& sk) {
  ByteWriter w;
  header(w, kSecretKeyMagic);
  write_params(w, sk.context->params());
  for (auto v : sk.s) w.u8(static_cast<std::uint8_t>(v));
  return w.take();
}

std::vector<std::uint8_t> serialize(const EvalKey& ek) {
  ByteWriter w;
  header(w, kEvalKeyMagic);
  write_params(w, ek.context->params());
  w.u32(static_cast<std::uint32_t>(ek.k0.size()));
  for (std::size_t i = 0; i < ek.k0.size(); ++i) {
    w.words(ek.k0[i]);
    w.words(ek.k1[i]);
  }
  return w.take();
}

PublicKey deserialize_public_key(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::Io, "public key");
  expect_header(r, kPublicKeyMagic);
  PublicKey pk;
  pk.context = Context::get(read_params(r));
  read_poly(r, *pk.context, pk.p0);
  read_poly(r, *pk.context, pk.p1);
  r.expect_done();
  return pk;
}

SecretKey deserialize_secret_key(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::Io, "secret key");
  expect_header(r, kSecretKeyMagic);
  auto ctx = Context::get(read_params(r));
  std::vector<std::int8_t> s(ctx->degree());
  const auto raw = r.bytes(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = static_cast<std::int8_t>(raw[i]);
    r.check(s[i] >= -1 && s[i] <= 1, "secret key must be ternary");
  }
  r.expect_done();
  return make_secret_key(ctx, std::move(s));
}

EvalKey deserialize_eval_key(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::Io, "evaluation key");
  expect_header(r, kEvalKeyMagic);
  EvalKey ek;
  ek.context = Context::get(read_params(r));
  std::size_t expected = 0;
  if (!ek.context->simulated())
    for (std::size_t i = 0; i < ek.context->q().size(); ++i) expected += ek.context->digit_count(i);
  r.check(r.u32() == expected, "evaluation key component count does not match the parameters");
  ek.k0.resize(expected);
  ek.k1.resize(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    read_poly(r, *ek.context, ek.k0[i]);
    read_poly(r, *ek.context, ek.k1[i]);
  }
  r.expect_done();
  return ek;
}

}  // namespace polyscore::he
