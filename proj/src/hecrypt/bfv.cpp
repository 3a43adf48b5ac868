#include "hecrypt/bfv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "common/error.hpp"

namespace polyscore::he {

namespace {

std::vector<std::int8_t> sample_ternary(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<int> d(-1, 1);
  std::vector<std::int8_t> out(n);
  for (auto& v : out) v = static_cast<std::int8_t>(d(rng));
  return out;
}

// Rounded Gaussian cut at six deviations (so the static noise bound holds),
// sampled by inversion of its cumulative table.
class ErrorSampler {
 public:
  explicit ErrorSampler(double stddev) {
    const int cut = static_cast<int>(std::floor(6.0 * stddev));
    std::vector<long double> mass;
    long double total = 0.0L;
    for (int k = -cut; k <= cut; ++k) {
      const long double hi = std::erfc(-(k + 0.5L) / (stddev * std::sqrt(2.0L)));
      const long double lo = std::erfc(-(k - 0.5L) / (stddev * std::sqrt(2.0L)));
      mass.push_back((hi - lo) / 2.0L);
      total += mass.back();
    }
    long double acc = 0.0L;
    for (std::size_t i = 0; i + 1 < mass.size(); ++i) {
      acc += mass[i] / total;
      cdf_.push_back(static_cast<std::uint64_t>(std::min(acc, 1.0L - 1e-18L) * 18446744073709551616.0L));
    }
    offset_ = -cut;
  }

  std::vector<std::int64_t> sample(std::size_t n, Rng& rng) const {
    std::vector<std::int64_t> out(n);
    for (auto& v : out) {
      const std::uint64_t u = rng();
      v = offset_ + (std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    }
    return out;
  }

 private:
  std::vector<std::uint64_t> cdf_;
  std::int64_t offset_ = 0;
};

std::vector<std::int64_t> sample_error(std::size_t n, double stddev, Rng& rng) {
  static thread_local double cached_stddev = 0.0;
  static thread_local std::unique_ptr<ErrorSampler> sampler;
  if (!sampler || cached_stddev != stddev) {
    sampler = std::make_unique<ErrorSampler>(stddev);
    cached_stddev = stddev;
  }
  return sampler->sample(n, rng);
}

template <class T>
Poly to_rns(const RnsBase& base, std::size_t n, const std::vector<T>& coeffs) {
  Poly out(base.size() * n);
  for (std::size_t i = 0; i < base.size(); ++i)
    for (std::size_t c = 0; c < n; ++c) out[i * n + c] = base.modulus(i).from_signed(coeffs[c]);
  return out;
}

Poly uniform_poly(const RnsBase& base, std::size_t n, Rng& rng) {
  Poly out(base.size() * n);
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::uniform_int_distribution<std::uint64_t> d(0, base.modulus(i).value() - 1);
    for (std::size_t c = 0; c < n; ++c) out[i * n + c] = d(rng);
  }
  return out;
}

void add_into(const RnsBase& base, std::size_t n, Poly& a, const Poly& b) {
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto& m = base.modulus(i);
    for (std::size_t c = 0; c < n; ++c) a[i * n + c] = m.add(a[i * n + c], b[i * n + c]);
  }
}

void sub_into(const RnsBase& base, std::size_t n, Poly& a, const Poly& b) {
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto& m = base.modulus(i);
    for (std::size_t c = 0; c < n; ++c) a[i * n + c] = m.sub(a[i * n + c], b[i * n + c]);
  }
}

// pointwise a * b (NTT form)
Poly hadamard(const RnsBase& base, std::size_t n, const Poly& a, const Poly& b) {
  Poly out(a.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto& m = base.modulus(i);
    for (std::size_t c = 0; c < n; ++c) out[i * n + c] = m.mul(a[i * n + c], b[i * n + c]);
  }
  return out;
}

void negate(const RnsBase& base, std::size_t n, Poly& a) {
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto& m = base.modulus(i);
    for (std::size_t c = 0; c < n; ++c) a[i * n + c] = m.neg(a[i * n + c]);
  }
}

void require_same(const Context& a, const Context& b) {
  require(&a == &b || a.params() == b.params(), ErrorCode::ParameterMismatch,
          "operands use different encryption parameters");
}

}  // namespace

SecretKey make_secret_key(std::shared_ptr<const Context> context, std::vector<std::int8_t> s) {
  require(context != nullptr, ErrorCode::InvalidArgument, "secret key needs parameters");
  require(s.size() == context->degree(), ErrorCode::ShapeMismatch, "secret key length does not match ring degree");
  for (auto v : s) require(v >= -1 && v <= 1, ErrorCode::InvalidArgument, "secret key must be ternary");
  SecretKey sk;
  sk.context = context;
  sk.s = std::move(s);
  if (!context->simulated()) {
    sk.s_ntt = to_rns(context->q(), context->degree(), sk.s);
    context->q().forward(sk.s_ntt.data());
  }
  return sk;
}

SessionKeys keygen(const HeParams& params, std::optional<std::uint64_t> seed) {
  params.validate();
  auto ctx = Context::get(params);
  Rng rng(seed.value_or(entropy_seed()));
  SessionKeys keys;
  keys.pk.context = keys.ek.context = ctx;
  const std::size_t n = ctx->degree();
  const auto& q = ctx->q();
  if (ctx->simulated()) {
    // Implicit secret -1: a ciphertext (c0, c1, c2) decrypts to c0 - c1 + c2.
    keys.sk = make_secret_key(ctx, {-1});
    keys.pk.p0 = uniform_poly(q, 1, rng);
    keys.pk.p1 = {0};
    return keys;
  }
  keys.sk = make_secret_key(ctx, sample_ternary(n, rng));
  const Poly& s = keys.sk.s_ntt;

  auto rlwe_sample = [&] {
    // (-(a s + e), a) in NTT form
    Poly a = uniform_poly(q, n, rng);
    Poly e = to_rns(q, n, sample_error(n, params.error_stddev, rng));
    q.forward(e.data());
    Poly b = hadamard(q, n, a, s);
    add_into(q, n, b, e);
    negate(q, n, b);
    return std::pair{std::move(b), std::move(a)};
  };

  std::tie(keys.pk.p0, keys.pk.p1) = rlwe_sample();

  const Poly s2 = hadamard(q, n, s, s);
  const int w = params.decomposition_base_bits;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& qi = q.modulus(i);
    for (std::size_t l = 0; l < ctx->digit_count(i); ++l) {
      auto [b, a] = rlwe_sample();
      const std::uint64_t shift = qi.pow(2, static_cast<std::uint64_t>(w) * l);
      const std::uint64_t factor = qi.mul(ctx->qhat_mod(i), shift);
      for (std::size_t c = 0; c < n; ++c) b[i * n + c] = qi.add(b[i * n + c], qi.mul(s2[i * n + c], factor));
      keys.ek.k0.push_back(std::move(b));
      keys.ek.k1.push_back(std::move(a));
    }
  }
  return keys;
}

Encryptor::Encryptor(PublicKey pk, std::optional<std::uint64_t> seed)
    : pk_(std::move(pk)), rng_(seed.value_or(entropy_seed())) {
  require(pk_.context != nullptr, ErrorCode::InvalidArgument, "public key has no parameters");
}

Ciphertext Encryptor::encrypt(std::uint64_t m, int scale_bits) {
  const auto& ctx = *pk_.context;
  const std::uint64_t t = ctx.params().t;
  require(m < t, ErrorCode::InvalidArgument, "plaintext must lie in [0, t)");
  Ciphertext ct;
  ct.context = pk_.context;
  ct.scale_bits = scale_bits;
  ct.noise_budget = ctx.noise().fresh_budget;
  if (ctx.simulated()) {
    std::uniform_int_distribution<std::uint64_t> d(0, t - 1);
    const std::uint64_t r = d(rng_);
    ct.parts = {{mod_add(m, r, t)}, {r}};
    return ct;
  }
  const std::size_t n = ctx.degree();
  const auto& q = ctx.q();
  Poly u = to_rns(q, n, sample_ternary(n, rng_));
  q.forward(u.data());
  Poly c0 = hadamard(q, n, pk_.p0, u);
  Poly c1 = hadamard(q, n, pk_.p1, u);
  q.inverse(c0.data());
  q.inverse(c1.data());
  add_into(q, n, c0, to_rns(q, n, sample_error(n, ctx.params().error_stddev, rng_)));
  add_into(q, n, c1, to_rns(q, n, sample_error(n, ctx.params().error_stddev, rng_)));
  ctx.add_scaled_message(m, c0.data());
  ct.parts = {std::move(c0), std::move(c1)};
  return ct;
}

Decryptor::Decryptor(SecretKey sk) : sk_(std::move(sk)) {
  require(sk_.context != nullptr, ErrorCode::InvalidArgument, "secret key has no parameters");
  if (!sk_.context->simulated()) s2_ntt_ = hadamard(sk_.context->q(), sk_.context->degree(), sk_.s_ntt, sk_.s_ntt);
}

Poly Decryptor::phase(const Ciphertext& ct) const {
  require(ct.context != nullptr, ErrorCode::InvalidArgument, "ciphertext has no parameters");
  require_same(*ct.context, *sk_.context);
  require(ct.size() == 2 || ct.size() == 3, ErrorCode::InvalidArgument, "ciphertext must have two or three parts");
  const auto& ctx = *sk_.context;
  const auto& q = ctx.q();
  const std::size_t n = ctx.degree();
  for (const auto& part : ct.parts)
    require(part.size() == ctx.words(), ErrorCode::ShapeMismatch, "ciphertext part has the wrong length");
  Poly x = ct.parts[0];
  if (ctx.simulated()) {
    sub_into(q, n, x, ct.parts[1]);
    if (ct.size() == 3) add_into(q, n, x, ct.parts[2]);
    return x;
  }
  for (std::size_t j = 1; j < ct.size(); ++j) {
    Poly c = ct.parts[j];
    q.forward(c.data());
    Poly prod = hadamard(q, n, c, j == 1 ? sk_.s_ntt : s2_ntt_);
    q.inverse(prod.data());
    add_into(q, n, x, prod);
  }
  return x;
}

std::uint64_t Decryptor::decrypt(const Ciphertext& ct) const {
  const auto& ctx = *sk_.context;
  const Poly x = phase(ct);
  if (ctx.simulated()) {
    require(ct.noise_budget > 0.0, ErrorCode::BudgetExhausted, "static budget reached zero");
    return x[0];
  }
  const std::size_t n = ctx.degree();
  // Every coefficient but the constant one encrypts zero; any other value
  // means the noise has wrapped.
  for (std::size_t c = 1; c < n; ++c)
    require(ctx.decode_coefficient(x.data() + c, n) == 0, ErrorCode::BudgetExhausted,
            "known-zero coefficient decrypted nonzero");
  if (test_mode()) {
    const double v = ctx.invariant_noise_log2(x);
    require(-1.0 - v > 0.0, ErrorCode::BudgetExhausted, "measured invariant noise exceeds one half");
  }
  return ctx.decode_coefficient(x.data(), n);
}

std::uint64_t Decryptor::decrypt_unchecked(const Ciphertext& ct) const {
  const Poly x = phase(ct);
  return sk_.context->simulated() ? x[0] : sk_.context->decode_coefficient(x.data(), sk_.context->degree());
}

double Decryptor::measured_budget(const Ciphertext& ct) const {
  const auto& ctx = *sk_.context;
  if (ctx.simulated()) return ct.noise_budget;
  const double v = ctx.invariant_noise_log2(phase(ct));
  return std::isinf(v) ? INFINITY : -1.0 - v;
}

void OpCounts::reset() {
  add = 0;
  add_plain = 0;
  mul_plain = 0;
  mul = 0;
  relinearize = 0;
}

Evaluator::Evaluator(std::shared_ptr<const Context> context, std::shared_ptr<const EvalKey> ek)
    : context_(std::move(context)), ek_(std::move(ek)) {
  require(context_ != nullptr, ErrorCode::InvalidArgument, "evaluator needs parameters");
  if (ek_) {
    require(ek_->context != nullptr, ErrorCode::InvalidArgument, "evaluation key has no parameters");
    require_same(*ek_->context, *context_);
  }
}

void Evaluator::count(std::atomic<std::uint64_t> OpCounts::*field, std::uint64_t n) const {
  if (counter_) (counter_->*field) += n;
}

void Evaluator::check(const Ciphertext& c) const {
  require(c.context != nullptr, ErrorCode::InvalidArgument, "ciphertext has no parameters");
  require_same(*c.context, *context_);
  require(c.size() >= 2, ErrorCode::InvalidArgument, "ciphertext needs at least two parts");
  for (const auto& part : c.parts)
    require(part.size() == context_->words(), ErrorCode::ShapeMismatch, "ciphertext part has the wrong length");
}

Ciphertext Evaluator::add(const Ciphertext& a, const Ciphertext& b) const {
  check(a);
  check(b);
  require(a.scale_bits == b.scale_bits, ErrorCode::InvalidArgument, "cannot add ciphertexts at different scales");
  count(&OpCounts::add);
  const auto& q = context_->q();
  const std::size_t n = context_->degree();
  Ciphertext out = a.size() >= b.size() ? a : b;
  const Ciphertext& other = a.size() >= b.size() ? b : a;
  for (std::size_t j = 0; j < other.size(); ++j) add_into(q, n, out.parts[j], other.parts[j]);
  out.noise_budget = std::max(0.0, NoiseModel::add(a.noise_budget, b.noise_budget));
  return out;
}

Ciphertext Evaluator::add_plain(const Ciphertext& a, std::uint64_t p) const {
  check(a);
  require(p < params().t, ErrorCode::InvalidArgument, "plaintext must lie in [0, t)");
  count(&OpCounts::add_plain);
  Ciphertext out = a;
  context_->add_scaled_message(p, out.parts[0].data());
  out.noise_budget = std::max(0.0, context_->noise().add_plain(a.noise_budget));
  return out;
}

Ciphertext Evaluator::mul_plain(const Ciphertext& a, std::uint64_t p, int plain_scale_bits) const {
  check(a);
  const std::uint64_t t = params().t;
  require(p < t, ErrorCode::InvalidArgument, "plaintext must lie in [0, t)");
  count(&OpCounts::mul_plain);
  const std::int64_t w = centered(p, t);
  const auto& q = context_->q();
  const std::size_t n = context_->degree();
  Ciphertext out = a;
  for (auto& part : out.parts)
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto& m = q.modulus(i);
      const std::uint64_t wi = m.from_signed(w);
      const std::uint64_t ws = m.shoup(wi);
      for (std::size_t c = 0; c < n; ++c) part[i * n + c] = m.mul_shoup(part[i * n + c], wi, ws);
    }
  out.scale_bits = a.scale_bits + plain_scale_bits;
  out.noise_budget = std::max(0.0, NoiseModel::mul_plain(a.noise_budget, std::fabs(static_cast<double>(w))));
  return out;
}

Ciphertext Evaluator::dot_plain(std::span<const Ciphertext* const> xs, std::span<const std::uint64_t> weights,
                                std::uint64_t bias, int plain_scale_bits) const {
  require(!xs.empty(), ErrorCode::InvalidArgument, "dot product needs at least one term");
  require(xs.size() == weights.size(), ErrorCode::ShapeMismatch, "one weight per ciphertext expected");
  const std::uint64_t t = params().t;
  for (const auto* x : xs) {
    require(x != nullptr, ErrorCode::InvalidArgument, "null ciphertext");
    check(*x);
    require(x->size() == xs[0]->size(), ErrorCode::InvalidArgument, "dot product terms must have equal size");
    require(x->scale_bits == xs[0]->scale_bits, ErrorCode::InvalidArgument, "dot product terms must share a scale");
  }
  require(bias < t, ErrorCode::InvalidArgument, "plaintext must lie in [0, t)");
  const auto& q = context_->q();
  const std::size_t n = context_->degree();
  const std::size_t parts = xs[0]->size();

  double l1 = 0.0, budget = INFINITY;
  std::vector<std::int64_t> w(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    require(weights[j] < t, ErrorCode::InvalidArgument, "plaintext must lie in [0, t)");
    w[j] = centered(weights[j], t);
    l1 += std::fabs(static_cast<double>(w[j]));
    budget = std::min(budget, xs[j]->noise_budget);
  }
  count(&OpCounts::mul_plain, xs.size());
  count(&OpCounts::add, xs.size() - 1);

  Ciphertext out;
  out.context = context_;
  out.scale_bits = xs[0]->scale_bits + plain_scale_bits;
  out.parts.assign(parts, Poly(context_->words(), 0));
  std::vector<u128> acc(n);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& m = q.modulus(i);
    for (std::size_t p = 0; p < parts; ++p) {
      std::fill(acc.begin(), acc.end(), 0);
      std::size_t pending = 0;
      for (std::size_t j = 0; j < xs.size(); ++j) {
        if (w[j] == 0) continue;
        const std::uint64_t wi = m.from_signed(w[j]);
        const std::uint64_t* src = xs[j]->parts[p].data() + i * n;
        for (std::size_t c = 0; c < n; ++c) acc[c] += static_cast<u128>(src[c]) * wi;
        // products are below 2^122; fold before 64 of them can overflow
        if (++pending == 32) {
          for (auto& v : acc) v = m.reduce(v);
          pending = 0;
        }
      }
      std::uint64_t* dst = out.parts[p].data() + i * n;
      for (std::size_t c = 0; c < n; ++c) dst[c] = m.reduce(acc[c]);
    }
  }
  out.noise_budget = std::max(0.0, NoiseModel::mul_plain(budget, l1));
  if (bias != 0) {
    count(&OpCounts::add_plain);
    context_->add_scaled_message(bias, out.parts[0].data());
    out.noise_budget = std::max(0.0, context_->noise().add_plain(out.noise_budget));
  }
  return out;
}

Ciphertext Evaluator::tensor(const Ciphertext& a, const Ciphertext* b) const {
  check(a);
  require(a.size() == 2, ErrorCode::InvalidArgument, "relinearize before multiplying again");
  if (b) {
    check(*b);
    require(b->size() == 2, ErrorCode::InvalidArgument, "relinearize before multiplying again");
  }
  const Ciphertext& bb = b ? *b : a;
  count(&OpCounts::mul);
  const auto& ctx = *context_;
  Ciphertext out;
  out.context = context_;
  out.scale_bits = a.scale_bits + bb.scale_bits;
  out.noise_budget = std::max(0.0, ctx.noise().mul(a.noise_budget, bb.noise_budget));
  if (ctx.simulated()) {
    const auto& m = ctx.q().modulus(0);
    const std::uint64_t a0 = a.parts[0][0], a1 = a.parts[1][0], b0 = bb.parts[0][0], b1 = bb.parts[1][0];
    out.parts = {{m.mul(a0, b0)}, {m.add(m.mul(a0, b1), m.mul(a1, b0))}, {m.mul(a1, b1)}};
    return out;
  }
  const auto& q = ctx.q();
  const auto& p = ctx.p();
  const std::size_t n = ctx.degree(), k = q.size(), l = p.size(), kw = k * n;

  // Exact lift of each input part into Q x P, transformed.
  auto lift = [&](const Poly& x) {
    Poly full((k + l) * n);
    std::copy(x.begin(), x.end(), full.begin());
    ctx.extend_q_to_p(x.data(), full.data() + kw);
    q.forward(full.data());
    p.forward(full.data() + kw);
    return full;
  };
  const Poly a0 = lift(a.parts[0]), a1 = lift(a.parts[1]);
  Poly b0_store, b1_store;
  if (b) {
    b0_store = lift(b->parts[0]);
    b1_store = lift(b->parts[1]);
  }
  const Poly& b0 = b ? b0_store : a0;
  const Poly& b1 = b ? b1_store : a1;

  std::array<Poly, 3> c;
  for (auto& v : c) v.resize((k + l) * n);
  for (std::size_t r = 0; r < k + l; ++r) {
    const auto& m = r < k ? q.modulus(r) : p.modulus(r - k);
    const std::size_t off = r * n;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t x = off + i;
      c[0][x] = m.mul(a0[x], b0[x]);
      c[1][x] = m.reduce(static_cast<u128>(a0[x]) * b1[x] + static_cast<u128>(a1[x]) * b0[x]);
      c[2][x] = m.mul(a1[x], b1[x]);
    }
  }
  Poly scaled(l * n);
  out.parts.resize(3);
  for (std::size_t j = 0; j < 3; ++j) {
    q.inverse(c[j].data());
    p.inverse(c[j].data() + kw);
    ctx.scale_and_round(c[j].data(), c[j].data() + kw, scaled.data());
    out.parts[j].resize(kw);
    ctx.p_to_q(scaled.data(), out.parts[j].data());
  }
  return out;
}

Ciphertext Evaluator::mul(const Ciphertext& a, const Ciphertext& b) const { return tensor(a, &b); }

Ciphertext Evaluator::square(const Ciphertext& a) const { return relinearize(tensor(a, nullptr)); }

Ciphertext Evaluator::relinearize(const Ciphertext& c) const {
  check(c);
  if (c.size() == 2) return c;
  require(c.size() == 3, ErrorCode::InvalidArgument, "relinearization expects a three-part ciphertext");
  count(&OpCounts::relinearize);
  const auto& ctx = *context_;
  Ciphertext out;
  out.context = context_;
  out.scale_bits = c.scale_bits;
  out.noise_budget = std::max(0.0, ctx.noise().relinearize(c.noise_budget));
  const auto& q = ctx.q();
  const std::size_t n = ctx.degree(), k = q.size();
  if (ctx.simulated()) {
    const auto& m = q.modulus(0);
    out.parts = {{m.add(c.parts[0][0], c.parts[2][0])}, c.parts[1]};
    return out;
  }
  require(ek_ != nullptr, ErrorCode::InvalidArgument, "relinearization needs an evaluation key");
  const int w = ctx.params().decomposition_base_bits;
  const std::uint64_t mask = w >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << w) - 1;

  // Products are accumulated lazily in 128 bits: a digit is below 2^w and a key
  // residue below 2^61, so up to 2^(67 - w) terms fit before a reduction.
  const std::size_t lazy_terms = w >= 66 ? 1 : std::min<std::size_t>(std::size_t{1} << std::min(67 - w, 30), 1024);
  std::vector<u128> wide0(k * n, 0), wide1(k * n, 0);
  Poly digit(k * n), rns(n);
  std::size_t key = 0, pending = 0;
  const auto fold = [&] {
    for (std::size_t j = 0; j < k; ++j) {
      const auto& m = q.modulus(j);
      for (std::size_t x = j * n; x < (j + 1) * n; ++x) {
        wide0[x] = m.reduce(wide0[x]);
        wide1[x] = m.reduce(wide1[x]);
      }
    }
    pending = 1;
  };
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t cidx = 0; cidx < n; ++cidx) rns[cidx] = ctx.rns_digit(i, c.parts[2][i * n + cidx]);
    for (std::size_t l = 0; l < ctx.digit_count(i); ++l, ++key) {
      const int shift = w * static_cast<int>(l);
      for (std::size_t j = 0; j < k; ++j) {
        const std::uint64_t qj = q.modulus(j).value();
        for (std::size_t cidx = 0; cidx < n; ++cidx) {
          // w <= 61 keeps the digit below 2 q_j, so one subtraction suffices
          const std::uint64_t d = (rns[cidx] >> shift) & mask;
          digit[j * n + cidx] = d >= qj ? (d - qj >= qj ? d % qj : d - qj) : d;
        }
      }
      q.forward(digit.data());
      if (pending + 1 > lazy_terms) fold();
      const Poly& k0 = ek_->k0[key];
      const Poly& k1 = ek_->k1[key];
      for (std::size_t x = 0; x < k * n; ++x) {
        wide0[x] += static_cast<u128>(digit[x]) * k0[x];
        wide1[x] += static_cast<u128>(digit[x]) * k1[x];
      }
      ++pending;
    }
  }
  Poly acc0(k * n), acc1(k * n);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& m = q.modulus(j);
    for (std::size_t x = j * n; x < (j + 1) * n; ++x) {
      acc0[x] = m.reduce(wide0[x]);
      acc1[x] = m.reduce(wide1[x]);
    }
  }
  q.inverse(acc0.data());
  q.inverse(acc1.data());
  out.parts = {c.parts[0], c.parts[1]};
  add_into(q, n, out.parts[0], acc0);
  add_into(q, n, out.parts[1], acc1);
  return out;
}

std::uint64_t encode_fixed(double v, int scale_bits, std::uint64_t t) {
  require(std::isfinite(v), ErrorCode::NonFinite, "cannot encode a non-finite value");
  const double r = std::nearbyint(std::ldexp(v, scale_bits));
  const double limit = static_cast<double>((t - 1) / 2);
  require(std::fabs(r) <= limit, ErrorCode::Overflow, "value exceeds the plaintext range at this scale");
  return to_residue(static_cast<std::int64_t>(r), t);
}

double decode_fixed(std::uint64_t m, int scale_bits, std::uint64_t t) {
  require(m < t, ErrorCode::InvalidArgument, "plaintext must lie in [0, t)");
  return std::ldexp(static_cast<double>(centered(m, t)), -scale_bits);
}

}  // namespace polyscore::he
