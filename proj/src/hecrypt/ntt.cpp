#include "hecrypt/ntt.hpp"

#include "common/error.hpp"

namespace polyscore::he {

namespace {

std::size_t bit_reverse(std::size_t x, int bits) {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

}  // namespace

NttTables::NttTables(std::size_t n, const Modulus& q) : n_(n), q_(q) {
  require(n >= 2 && (n & (n - 1)) == 0, ErrorCode::InvalidArgument, "ring degree must be a power of two");
  require((q.value() - 1) % (2 * n) == 0, ErrorCode::InvalidArgument, "NTT modulus must be 1 mod 2n");
  log_n_ = __builtin_ctzll(n);
  const std::uint64_t psi = primitive_root_of_unity(2 * n, q);
  const std::uint64_t psi_inv = q.inverse(psi);
  psi_.resize(n);
  psi_inv_.resize(n);
  psi_shoup_.resize(n);
  psi_inv_shoup_.resize(n);
  std::uint64_t p = 1, pi = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = bit_reverse(i, log_n_);
    psi_[r] = p;
    psi_inv_[r] = pi;
    p = q.mul(p, psi);
    pi = q.mul(pi, psi_inv);
  }
  for (std::size_t i = 0; i < n; ++i) {
    psi_shoup_[i] = q.shoup(psi_[i]);
    psi_inv_shoup_[i] = q.shoup(psi_inv_[i]);
  }
  n_inv_ = q.inverse(n);
  n_inv_shoup_ = q.shoup(n_inv_);
}

void NttTables::forward(std::uint64_t* a) const {
  const std::uint64_t qv = q_.value();
  const std::uint64_t two_q = 2 * qv;
  // Values are kept in [0, 4q) between stages (q < 2^61) and reduced at the end.
  std::size_t t = n_;
  for (std::size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint64_t w = psi_[m + i];
      const std::uint64_t ws = psi_shoup_[m + i];
      std::uint64_t* x = a + 2 * i * t;
      std::uint64_t* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        std::uint64_t u = x[j];
        if (u >= two_q) u -= two_q;
        const std::uint64_t v = q_.mul_shoup_lazy(y[j], w, ws);
        x[j] = u + v;
        y[j] = u + two_q - v;
      }
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    std::uint64_t v = a[i];
    if (v >= two_q) v -= two_q;
    if (v >= qv) v -= qv;
    a[i] = v;
  }
}

void NttTables::inverse(std::uint64_t* a) const {
  const std::uint64_t qv = q_.value();
  const std::uint64_t two_q = 2 * qv;
  // Values are kept in [0, 2q) between stages.
  std::size_t t = 1;
  for (std::size_t m = n_; m > 1; m >>= 1) {
    const std::size_t h = m >> 1;
    for (std::size_t i = 0; i < h; ++i) {
      const std::uint64_t w = psi_inv_[h + i];
      const std::uint64_t ws = psi_inv_shoup_[h + i];
      std::uint64_t* x = a + 2 * i * t;
      std::uint64_t* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        const std::uint64_t u = x[j];
        const std::uint64_t v = y[j];
        std::uint64_t s = u + v;
        if (s >= two_q) s -= two_q;
        x[j] = s;
        y[j] = q_.mul_shoup_lazy(u + two_q - v, w, ws);
      }
    }
    t <<= 1;
  }
  for (std::size_t i = 0; i < n_; ++i) a[i] = q_.mul_shoup(a[i], n_inv_, n_inv_shoup_);
}

std::vector<std::uint64_t> negacyclic_multiply(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                               const NttTables& tables) {
  require(a.size() == tables.n() && b.size() == tables.n(), ErrorCode::ShapeMismatch, "polynomial length mismatch");
  std::vector<std::uint64_t> x(a.begin(), a.end()), y(b.begin(), b.end());
  tables.forward(x);
  tables.forward(y);
  const auto& q = tables.modulus();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = q.mul(x[i], y[i]);
  tables.inverse(x);
  return x;
}

}  // namespace polyscore::he
