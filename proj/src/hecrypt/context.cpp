#include "hecrypt/context.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <map>
#include <mutex>

#include "common/error.hpp"

namespace polyscore::he {

using boost::multiprecision::cpp_int;

namespace {

cpp_int product(const std::vector<std::uint64_t>& primes) {
  cpp_int p = 1;
  for (auto v : primes) p *= v;
  return p;
}

std::uint64_t mod_of(const cpp_int& x, std::uint64_t m) { return static_cast<std::uint64_t>(x % m); }

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct Context::BigConstants {
  cpp_int q;
  std::vector<cpp_int> qhat;  // q / q_i
};

bool test_mode() {
  const char* v = std::getenv("POLYSCORE_TEST_MODE");
  return v != nullptr && std::strcmp(v, "1") == 0;
}

RnsBase::RnsBase(std::size_t n, const std::vector<std::uint64_t>& primes) : n_(n), primes_(primes) {
  // Tables are cached per (n, prime) so that Q and P bases of different
  // parameter sets share them.
  static std::map<std::pair<std::size_t, std::uint64_t>, std::shared_ptr<const NttTables>> tables;
  static std::mutex tables_mutex;
  for (auto p : primes) {
    moduli_.emplace_back(p);
    if (n < 2) continue;
    std::lock_guard lock(tables_mutex);
    auto& slot = tables[{n, p}];
    if (!slot) slot = std::make_shared<const NttTables>(n, moduli_.back());
    ntt_.push_back(slot);
  }
}

void RnsBase::forward(std::uint64_t* poly) const {
  for (std::size_t i = 0; i < ntt_.size(); ++i) ntt_[i]->forward(poly + i * n_);
}

void RnsBase::inverse(std::uint64_t* poly) const {
  for (std::size_t i = 0; i < ntt_.size(); ++i) ntt_[i]->inverse(poly + i * n_);
}

BaseConverter::BaseConverter(const RnsBase& from, const RnsBase& to) : from_(&from), to_(&to) {
  const cpp_int f = product(from.primes());
  const std::size_t k = from.size(), l = to.size();
  hat_mod_.resize(k * l);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& m = from.modulus(i);
    const cpp_int hat = f / m.value();
    const std::uint64_t inv = m.inverse(mod_of(hat, m.value()));
    hat_inv_.push_back(inv);
    hat_inv_shoup_.push_back(m.shoup(inv));
    inv_.push_back(1.0L / static_cast<long double>(m.value()));
    for (std::size_t j = 0; j < l; ++j) hat_mod_[i * l + j] = mod_of(hat, to.modulus(j).value());
  }
  for (std::size_t j = 0; j < l; ++j) prod_mod_.push_back(mod_of(f, to.modulus(j).value()));
}

void BaseConverter::convert(const std::uint64_t* in, std::uint64_t* out, std::size_t n) const {
  const std::size_t k = from_->size(), l = to_->size();
  std::vector<std::uint64_t> y(k);
  for (std::size_t c = 0; c < n; ++c) {
    long double v = 0.0L;
    for (std::size_t i = 0; i < k; ++i) {
      y[i] = from_->modulus(i).mul_shoup(in[i * n + c], hat_inv_[i], hat_inv_shoup_[i]);
      v += static_cast<long double>(y[i]) * inv_[i];
    }
    // x = sum y_i F/f_i - v F for the centered x, v = round(sum y_i / f_i).
    const auto v_int = static_cast<std::uint64_t>(v + 0.5L);
    for (std::size_t j = 0; j < l; ++j) {
      const auto& g = to_->modulus(j);
      u128 acc = 0;
      for (std::size_t i = 0; i < k; ++i) acc += static_cast<u128>(y[i]) * hat_mod_[i * l + j];
      out[j * n + c] = g.sub(g.reduce(acc), g.mul(g.reduce(v_int), prod_mod_[j]));
    }
  }
}

std::shared_ptr<const Context> Context::get(const HeParams& params) {
  static std::vector<std::shared_ptr<const Context>> cache;
  std::lock_guard lock(cache_mutex());
  for (const auto& c : cache)
    if (c->params() == params) return c;
  auto ctx = std::make_shared<const Context>(params);
  cache.push_back(ctx);
  return ctx;
}

Context::Context(const HeParams& params) : params_(params) {
  params_.validate();
  noise_ = NoiseModel::for_params(params_);
  auto big = std::make_shared<BigConstants>();
  if (simulated()) {
    degree_ = 1;
    q_ = RnsBase(1, {params_.t});
    big->q = params_.t;
    big->qhat = {cpp_int(1)};
    qhat_inv_ = {1};
    qhat_inv_shoup_ = {q_.modulus(0).shoup(1)};
    qhat_mod_self_ = {1};
    digit_counts_ = {1};
    big_ = big;
    return;
  }
  degree_ = params_.n;
  q_ = RnsBase(degree_, params_.moduli);
  const cpp_int qv = product(params_.moduli);
  big->q = qv;
  const std::uint64_t t = params_.t;

  // Auxiliary base P for exact tensoring: P > t * n * q with margin.
  const double need = params_.log2_q() + std::log2(static_cast<double>(t)) + std::log2(static_cast<double>(degree_)) + 3;
  std::vector<std::uint64_t> exclude = params_.moduli;
  exclude.push_back(t);
  std::vector<std::uint64_t> aux;
  double have = 0.0;
  int bits = 61;
  while (have < need) {
    const auto next = find_primes(bits, 2 * degree_, 1, exclude).front();
    aux.push_back(next);
    exclude.push_back(next);
    have += std::log2(static_cast<double>(next));
  }
  p_ = RnsBase(degree_, aux);
  q_to_p_ = BaseConverter(q_, p_);
  p_to_q_ = BaseConverter(p_, q_);
  const cpp_int pv = product(aux);

  const std::size_t k = q_.size(), l = p_.size();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& m = q_.modulus(i);
    const cpp_int hat = qv / m.value();
    big->qhat.push_back(hat);
    const std::uint64_t hat_mod = mod_of(hat, m.value());
    qhat_mod_self_.push_back(hat_mod);
    qhat_inv_.push_back(m.inverse(hat_mod));
    qhat_inv_shoup_.push_back(m.shoup(qhat_inv_.back()));
    const auto w = static_cast<std::size_t>(params_.decomposition_base_bits);
    digit_counts_.push_back((static_cast<std::size_t>(m.bit_count()) + w - 1) / w);
  }
  big_ = big;

  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t qi = q_.modulus(i).value();
    t_mod_q_.push_back(t % qi);
    u128 inv = qi;  // Newton iteration for the inverse mod 2^128 (qi odd)
    for (int it = 0; it < 7; ++it) inv *= 2 - static_cast<u128>(qi) * inv;
    q_inv_2_128_.push_back(inv);
    const cpp_int recip = (cpp_int(1) << 128) / qi;
    recip_hi_.push_back(static_cast<std::uint64_t>(recip >> 64));
    recip_lo_.push_back(static_cast<std::uint64_t>(recip & cpp_int(~std::uint64_t{0})));
  }

  const cpp_int delta = qv / t;
  for (std::size_t i = 0; i < k; ++i) delta_mod_q_.push_back(mod_of(delta, q_.modulus(i).value()));
  q_mod_t_ = mod_of(qv, t);

  const cpp_int tp = cpp_int(t) * pv;
  int_part_mod_p_.resize(k * l);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& m = q_.modulus(i);
    const std::uint64_t om = m.inverse(mod_of(pv * (qv / m.value()), m.value()));
    omega_.push_back(om);
    omega_shoup_.push_back(m.shoup(om));
    const cpp_int whole = tp / m.value();
    const auto rem = static_cast<std::uint64_t>(tp % m.value());
    frac_part_.push_back(static_cast<std::uint64_t>((static_cast<u128>(rem) << 64) / m.value()));
    for (std::size_t j = 0; j < l; ++j) int_part_mod_p_[i * l + j] = mod_of(whole, p_.modulus(j).value());
  }
  for (std::size_t j = 0; j < l; ++j) {
    const auto& m = p_.modulus(j);
    const std::uint64_t v = m.mul(t % m.value(), m.inverse(mod_of(qv, m.value())));
    t_qinv_mod_p_.push_back(v);
    t_qinv_mod_p_shoup_.push_back(m.shoup(v));
  }
}

void Context::add_scaled_message(std::uint64_t m, std::uint64_t* poly) const {
  if (simulated()) {
    poly[0] = q_.modulus(0).add(poly[0], m);
    return;
  }
  // round(q m / t) = floor(q/t) m + round((q mod t) m / t)
  const std::uint64_t t = params_.t;
  const auto carry = static_cast<std::uint64_t>((static_cast<u128>(q_mod_t_) * m + t / 2) / t);
  for (std::size_t i = 0; i < q_.size(); ++i) {
    const auto& qi = q_.modulus(i);
    const std::uint64_t v = qi.add(qi.mul(delta_mod_q_[i], qi.reduce(m)), qi.reduce(carry));
    poly[i * degree_] = qi.add(poly[i * degree_], v);
  }
}

void Context::scale_and_round(const std::uint64_t* q_part, const std::uint64_t* p_part, std::uint64_t* out_p) const {
  const std::size_t k = q_.size(), l = p_.size(), n = degree_;
  std::vector<std::uint64_t> z(k);
  for (std::size_t c = 0; c < n; ++c) {
    u128 frac = 0;
    for (std::size_t i = 0; i < k; ++i) {
      z[i] = q_.modulus(i).mul_shoup(q_part[i * n + c], omega_[i], omega_shoup_[i]);
      frac += static_cast<u128>(z[i]) * frac_part_[i];
    }
    const auto rounded = static_cast<std::uint64_t>((frac + (static_cast<u128>(1) << 63)) >> 64);
    for (std::size_t j = 0; j < l; ++j) {
      const auto& pj = p_.modulus(j);
      u128 acc = rounded;
      for (std::size_t i = 0; i < k; ++i) acc += static_cast<u128>(z[i]) * int_part_mod_p_[i * l + j];
      const std::uint64_t own = pj.mul_shoup(p_part[j * n + c], t_qinv_mod_p_[j], t_qinv_mod_p_shoup_[j]);
      out_p[j * n + c] = pj.add(pj.reduce(acc), own);
    }
  }
}

std::uint64_t Context::decode_coefficient(const std::uint64_t* residues, std::size_t stride) const {
  const std::uint64_t t = params_.t;
  if (simulated()) return residues[0];
  // t x / q = sum_i t y_i / q_i with y_i the RNS digits; split each term into
  // an integer quotient and a remainder fraction.
  const std::size_t k = q_.size();
  std::uint64_t whole = 0;
  u128 frac = 0;
  std::vector<std::uint64_t> rems(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& qi = q_.modulus(i);
    const std::uint64_t y = rns_digit(i, residues[i * stride]);
    const std::uint64_t rem = qi.mul(t_mod_q_[i], y);
    // exact division of t*y - rem by q_i through its inverse mod 2^128
    const auto quot = static_cast<std::uint64_t>((static_cast<u128>(t) * y - rem) * q_inv_2_128_[i]);
    rems[i] = rem;
    whole = mod_add(whole, quot % t, t);
    frac += static_cast<u128>(rem) * recip_hi_[i] + (static_cast<u128>(rem) * recip_lo_[i] >> 64);
  }
  const auto int_part = static_cast<std::uint64_t>(frac >> 64);
  const auto low = static_cast<std::uint64_t>(frac);
  const std::uint64_t half = std::uint64_t{1} << 63;
  std::uint64_t round_up;
  // each fraction is low by at most two units
  if (low < half - 2 * k || low > half) {
    round_up = low >= half ? 1 : 0;
  } else {
    // Too close to one half for the fixed-point sum; settle it exactly.
    cpp_int num = 0;
    for (std::size_t i = 0; i < k; ++i) num += big_->qhat[i] * rems[i];
    const cpp_int total = (2 * num + big_->q) / (2 * big_->q);
    return mod_add(whole, mod_of(total, t), t);
  }
  return mod_add(whole, (int_part + round_up) % t, t);
}

double Context::invariant_noise_log2(const std::vector<std::uint64_t>& x) const {
  if (simulated()) return -INFINITY;
  require(x.size() == words(), ErrorCode::ShapeMismatch, "polynomial size does not match the parameters");
  const std::size_t k = q_.size(), n = degree_;
  const cpp_int& q = big_->q;
  const cpp_int half = q / 2;
  cpp_int worst = 0;
  for (std::size_t c = 0; c < n; ++c) {
    cpp_int acc = 0;
    for (std::size_t i = 0; i < k; ++i) acc += big_->qhat[i] * rns_digit(i, x[i * n + c]);
    cpp_int r = (acc * params_.t) % q;
    if (r > half) r = q - r;
    if (r > worst) worst = r;
  }
  if (worst == 0) return -INFINITY;
  // log2(worst / q) via the leading bits of each.
  const auto lg = [](const cpp_int& v) {
    const auto msb = static_cast<long>(boost::multiprecision::msb(v));
    const long shift = std::max(0L, msb - 60);
    return static_cast<double>(shift) + std::log2(static_cast<double>(static_cast<std::uint64_t>(v >> shift)));
  };
  return lg(worst) - lg(q);
}

}  // namespace polyscore::he
