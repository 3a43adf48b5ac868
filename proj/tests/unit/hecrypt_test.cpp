#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "common/error.hpp"
#include "common/random.hpp"
#include "hecrypt/bfv.hpp"
#include "hecrypt/circuit.hpp"
#include "hecrypt/modulus.hpp"
#include "hecrypt/ntt.hpp"
#include "hecrypt/params.hpp"
#include "hecrypt/serialize.hpp"
#include "netcore/fixed_point.hpp"

namespace polyscore::he {
namespace {

// Schoolbook product in Z_q[X]/(X^n + 1).
std::vector<std::uint64_t> schoolbook(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b,
                                      std::uint64_t q) {
  const std::size_t n = a.size();
  std::vector<std::uint64_t> c(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t p = mod_mul(a[i], b[j], q);
      if (i + j < n) {
        c[i + j] = mod_add(c[i + j], p, q);
      } else {
        c[i + j - n] = mod_sub(c[i + j - n], p, q);
      }
    }
  return c;
}

bool trial_division_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

struct Session {
  SessionKeys keys;
  Encryptor enc;
  Decryptor dec;
  Evaluator ev;

  Session(const HeParams& p, std::uint64_t seed)
      : keys(keygen(p, seed)),
        enc(keys.pk, seed + 1),
        dec(keys.sk),
        ev(keys.pk.context, std::make_shared<EvalKey>(keys.ek)) {}
};

class TestModeGuard {
 public:
  TestModeGuard() { setenv("POLYSCORE_TEST_MODE", "1", 1); }
  ~TestModeGuard() { unsetenv("POLYSCORE_TEST_MODE"); }
};

PolyNetwork random_dpn(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, bool sigmoid = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto dense = [&](std::size_t o, std::size_t i) {
    Tensor w({o, i}), b({o});
    for (auto& v : w.data) v = u(rng);
    for (auto& v : b.data) v = 0.25 * u(rng);
    return Layer::dense(std::move(w), std::move(b));
  };
  return PolyNetwork({in}, {dense(hidden, in),
                            Layer::activation(sigmoid ? LayerKind::SigmoidPoly : LayerKind::SquareActivation),
                            dense(out, hidden)});
}

TEST(Modulus, BarrettMatchesDivision) {
  Rng rng(1);
  const std::vector<std::uint64_t> primes = {3, 17, 65537, find_primes(40, 2, 1).front(), find_primes(61, 8192, 1).front(),
                                             (std::uint64_t{1} << 61) - 1};
  for (std::uint64_t q : primes) {
    const Modulus m(q);
    std::uniform_int_distribution<std::uint64_t> d(0, q - 1);
    for (int i = 0; i < 2000; ++i) {
      const std::uint64_t a = d(rng), b = d(rng);
      ASSERT_EQ(m.mul(a, b), mod_mul(a, b, q));
      const u128 wide = static_cast<u128>(rng()) << 64 | rng();
      ASSERT_EQ(m.reduce(wide), static_cast<std::uint64_t>(wide % q));
      const std::uint64_t ws = m.shoup(b);
      ASSERT_EQ(m.mul_shoup(a, b, ws), mod_mul(a, b, q));
    }
    if (q > 3) {
      const std::uint64_t a = d(rng) | 1;
      EXPECT_EQ(m.mul(a, m.inverse(a)), 1u);
    }
  }
}

TEST(Modulus, FromSignedHandlesExtremes) {
  const Modulus m(65537);
  EXPECT_EQ(m.from_signed(-1), 65536u);
  EXPECT_EQ(m.from_signed(65537), 0u);
  EXPECT_EQ(m.from_signed(INT64_MIN), to_residue(INT64_MIN, 65537));
  EXPECT_EQ(m.from_signed(INT64_MAX), static_cast<std::uint64_t>(INT64_MAX) % 65537);
}

TEST(Modulus, PrimalityAgreesWithTrialDivision) {
  for (std::uint64_t n = 0; n < 5000; ++n) ASSERT_EQ(is_prime(n), trial_division_prime(n)) << n;
  EXPECT_TRUE(is_prime((1ULL << 61) - 1));
  EXPECT_FALSE(is_prime(3215031751ULL));  // strong pseudoprime to bases 2, 3, 5, 7
}

TEST(Modulus, FindPrimesHaveTheRequestedForm) {
  const auto ps = find_primes(50, 4096, 3);
  ASSERT_EQ(ps.size(), 3u);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_TRUE(is_prime(ps[i]));
    EXPECT_EQ(ps[i] % 4096, 1u);
    EXPECT_LT(ps[i], 1ULL << 50);
    if (i > 0) {
      EXPECT_LT(ps[i], ps[i - 1]);
    }
  }
  const auto other = find_primes(50, 4096, 1, {ps[0]});
  EXPECT_EQ(other.front(), ps[1]);
}

TEST(Ntt, MatchesSchoolbookUpTo256) {
  Rng rng(2);
  for (std::size_t n = 2; n <= 256; n *= 2) {
    for (int bits : {20, 45, 60, 61}) {
      const auto q = find_primes(bits, 2 * n, 1).front();
      const NttTables tables(n, Modulus(q));
      std::uniform_int_distribution<std::uint64_t> d(0, q - 1);
      for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::uint64_t> a(n), b(n);
        for (auto& v : a) v = d(rng);
        for (auto& v : b) v = d(rng);
        ASSERT_EQ(negacyclic_multiply(a, b, tables), schoolbook(a, b, q)) << "n=" << n << " q=" << q;
      }
    }
  }
}

TEST(Ntt, InverseUndoesForward) {
  const std::size_t n = 4096;
  const auto q = find_primes(60, 2 * n, 1).front();
  const NttTables tables(n, Modulus(q));
  Rng rng(3);
  std::vector<std::uint64_t> a(n);
  for (auto& v : a) v = rng() % q;
  auto b = a;
  tables.forward(b);
  tables.inverse(b);
  EXPECT_EQ(a, b);
}

TEST(Params, PresetsAreValid) {
  const auto names = parameter_set_names();
  ASSERT_EQ(names, (std::vector<std::string>{"toy2048", "mid4096", "big8192"}));
  std::size_t last_n = 0;
  int last_depth = -1;
  for (const auto& p : default_parameter_sets()) {
    EXPECT_NO_THROW(p.validate());
    EXPECT_EQ(p.t % (2 * p.n), 1u);
    for (auto q : p.moduli) {
      EXPECT_GE(q, 1ULL << 40);
      EXPECT_LT(q, 1ULL << 61);
    }
    EXPECT_GT(p.n, last_n);
    const int depth = NoiseModel::for_params(p).depth_capacity();
    EXPECT_GE(depth, last_depth);
    last_n = p.n;
    last_depth = depth;
  }
  EXPECT_THROW(parameter_set("huge"), Error);
}

TEST(Params, ValidationRejectsBadSets) {
  auto p = parameter_set("toy2048");
  p.n = 3000;
  EXPECT_THROW(p.validate(), Error);
  p = parameter_set("toy2048");
  p.t = p.moduli[0];
  EXPECT_THROW(p.validate(), Error);
  p = parameter_set("toy2048");
  p.t = 1000;
  EXPECT_THROW(p.validate(), Error);
  p = parameter_set("toy2048");
  p.moduli.push_back(p.moduli[0]);
  EXPECT_THROW(p.validate(), Error);
}

TEST(Params, PlanPicksMid4096ForTheSquareExample) {
  Rng rng(4);
  const auto net = random_dpn(8, 8, 10, rng);
  // Independent interval bound: |x| <= 2^7, weights snapped at the finest
  // 8-bit scale, biases at the accumulated scale.
  double wmax = 0;
  for (const auto& l : net.layers())
    if (l.kind == LayerKind::Dense)
      for (double v : l.params[0].data) wmax = std::max(wmax, std::fabs(v));
  int sw = 0;
  while (std::nearbyint(wmax * std::ldexp(1.0, sw + 1)) <= 127) ++sw;
  int sin = 0;
  while (std::nearbyint(8.0 * std::ldexp(1.0, sin + 1)) <= 127) ++sin;
  auto layer_bound = [&](const Layer& l, const std::vector<double>& in, int out_scale) {
    std::vector<double> out(l.params[0].shape[0]);
    for (std::size_t j = 0; j < out.size(); ++j) {
      double acc = std::fabs(std::nearbyint(std::ldexp(l.params[1][j], out_scale)));
      for (std::size_t i = 0; i < in.size(); ++i)
        acc += std::fabs(std::nearbyint(std::ldexp(l.params[0].data[j * in.size() + i], sw))) * in[i];
      out[j] = acc;
    }
    return out;
  };
  auto h = layer_bound(net.layers()[0], std::vector<double>(8, 128.0), sin + sw);
  double top = *std::max_element(h.begin(), h.end());
  for (auto& v : h) v = v * v;
  top = std::max(top, *std::max_element(h.begin(), h.end()));
  const auto o = layer_bound(net.layers()[2], h, 2 * (sin + sw) + sw);
  top = std::max(top, *std::max_element(o.begin(), o.end()));

  const auto bound = magnitude_bound(net, 8, 8);
  EXPECT_NEAR(bound.log2_bound, std::log2(top), 1e-9);
  EXPECT_EQ(bound.depth, 1);
  EXPECT_GT(bound.log2_bound, 31.0);  // beyond the 30-bit t of toy2048
  EXPECT_EQ(plan_parameters(net, 8, 8).name, "mid4096");
}

TEST(Params, LinearNetGetsTheSmallestSet) {
  Tensor w({4, 6}), b({4});
  for (std::size_t i = 0; i < w.size(); ++i) w.data[i] = 0.1 * static_cast<double>(i % 5) - 0.2;
  const PolyNetwork net({6}, {Layer::dense(w, b)});
  EXPECT_EQ(magnitude_bound(net, 8, 8).depth, 0);
  EXPECT_EQ(plan_parameters(net, 8, 8).name, "toy2048");
}

TEST(Params, TooDeepNetHasNoSet) {
  Rng rng(5);
  std::vector<Layer> layers;
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 6; ++i) {
    Tensor w({2, 2}), b({2});
    for (auto& v : w.data) v = u(rng);
    layers.push_back(Layer::dense(w, b));
    layers.push_back(Layer::activation(LayerKind::SquareActivation));
  }
  const PolyNetwork net({2}, layers);
  try {
    plan_parameters(net, 4, 4);
    FAIL() << "expected NoParameterSet";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoParameterSet);
    EXPECT_NE(std::string(e.what()).find("depth 6"), std::string::npos);
  }
}

TEST(Bfv, RoundTripsRandomMessages) {
  for (const auto& p : {parameter_set("mid4096"), simulated(parameter_set("mid4096"))}) {
    Session s(p, 11);
    Rng rng(6);
    std::uniform_int_distribution<std::uint64_t> d(0, p.t - 1);
    for (int i = 0; i < 1000; ++i) {
      const std::uint64_t m = d(rng);
      ASSERT_EQ(s.dec.decrypt(s.enc.encrypt(m)), m);
    }
    EXPECT_EQ(s.dec.decrypt(s.enc.encrypt(0)), 0u);
    EXPECT_EQ(s.dec.decrypt(s.enc.encrypt(p.t - 1)), p.t - 1);
    EXPECT_THROW(s.enc.encrypt(p.t), Error);
  }
}

TEST(Bfv, KeysDependOnTheSeed) {
  for (const auto& p : {parameter_set("toy2048"), simulated(parameter_set("toy2048"))}) {
    const auto a = keygen(p, 1), b = keygen(p, 2), c = keygen(p, 1);
    EXPECT_NE(a.pk.p0, b.pk.p0);
    EXPECT_EQ(a.pk.p0, c.pk.p0);
    EXPECT_EQ(a.sk.s, c.sk.s);
  }
  const auto sk = keygen(parameter_set("toy2048"), 3).sk;
  for (auto v : sk.s) ASSERT_TRUE(v >= -1 && v <= 1);
}

TEST(Bfv, EncryptionIsRandomized) {
  for (const auto& p : {parameter_set("toy2048"), simulated(parameter_set("toy2048"))}) {
    Session s(p, 12);
    const auto a = s.enc.encrypt(42), b = s.enc.encrypt(42);
    EXPECT_NE(a.parts, b.parts);
    EXPECT_EQ(s.dec.decrypt(a), 42u);
    EXPECT_EQ(s.dec.decrypt(b), 42u);
  }
}

TEST(Bfv, FreshBudgetIsPositiveAndStaticIsConservative) {
  for (const auto& p : default_parameter_sets()) {
    Session s(p, 13);
    const auto ct = s.enc.encrypt(p.t / 3);
    EXPECT_GT(ct.noise_budget, 0.0);
    const double measured = s.dec.measured_budget(ct);
    EXPECT_GT(measured, 0.0) << p.name;
    EXPECT_LE(ct.noise_budget, measured) << p.name;
  }
}

TEST(Bfv, HomomorphicLaws) {
  for (const auto& p : {parameter_set("mid4096"), simulated(parameter_set("mid4096"))}) {
    Session s(p, 14);
    const auto t = p.t;
    EXPECT_EQ(s.dec.decrypt(s.ev.add(s.enc.encrypt(5), s.enc.encrypt(7))), 12u);
    EXPECT_EQ(s.dec.decrypt(s.ev.mul_plain(s.enc.encrypt(3), 4)), 12u);
    const auto prod = s.ev.mul(s.enc.encrypt(3), s.enc.encrypt(3));
    EXPECT_EQ(prod.size(), 3u);
    EXPECT_EQ(s.dec.decrypt(prod), 9u);
    const auto relin = s.ev.relinearize(prod);
    EXPECT_EQ(relin.size(), 2u);
    EXPECT_EQ(s.dec.decrypt(relin), 9u);
    EXPECT_EQ(s.dec.decrypt(s.ev.square(s.enc.encrypt(3))), 9u);
    EXPECT_EQ(s.dec.decrypt(s.ev.add_plain(s.enc.encrypt(t - 2), 5)), 3u);
    EXPECT_EQ(s.dec.decrypt(s.ev.mul_plain(s.enc.encrypt(t - 1), t - 1)), 1u);
    // a three-part ciphertext can still be added and decrypted
    EXPECT_EQ(s.dec.decrypt(s.ev.add(prod, s.enc.encrypt(1))), 10u);
  }
}

TEST(Bfv, RandomOperationTriples) {
  for (const auto& p : {parameter_set("toy2048"), parameter_set("mid4096")}) {
    Session s(p, 15);
    Rng rng(7);
    std::uniform_int_distribution<std::uint64_t> d(0, p.t - 1);
    for (int i = 0; i < 30; ++i) {
      const std::uint64_t a = d(rng), b = d(rng), c = d(rng);
      const auto ca = s.enc.encrypt(a), cb = s.enc.encrypt(b);
      ASSERT_EQ(s.dec.decrypt(s.ev.add(ca, cb)), mod_add(a, b, p.t));
      ASSERT_EQ(s.dec.decrypt(s.ev.mul_plain(ca, c)), mod_mul(a, c, p.t));
      ASSERT_EQ(s.dec.decrypt(s.ev.relinearize(s.ev.mul(ca, cb))), mod_mul(a, b, p.t));
    }
  }
}

TEST(Bfv, BudgetNeverIncreasesAndMulAlwaysCosts) {
  Session s(parameter_set("mid4096"), 16);
  const auto a = s.enc.encrypt(9), b = s.enc.encrypt(4);
  const auto sum = s.ev.add(a, b);
  EXPECT_LE(sum.noise_budget, std::min(a.noise_budget, b.noise_budget));
  EXPECT_LE(s.ev.add_plain(a, 3).noise_budget, a.noise_budget);
  EXPECT_LE(s.ev.mul_plain(a, 3).noise_budget, a.noise_budget);
  EXPECT_LE(s.ev.mul_plain(a, 1).noise_budget, a.noise_budget);
  const auto m = s.ev.mul(a, b);
  EXPECT_LT(m.noise_budget, std::min(a.noise_budget, b.noise_budget));
  EXPECT_LE(s.ev.relinearize(m).noise_budget, m.noise_budget);
}

TEST(Bfv, StaticBudgetStaysBelowMeasured) {
  Session s(parameter_set("mid4096"), 17);
  auto x = s.enc.encrypt(3);
  for (int depth = 0; depth < 2; ++depth) {
    x = s.ev.mul_plain(s.ev.add(x, s.enc.encrypt(1)), 100);
    x = s.ev.square(x);
    EXPECT_LE(x.noise_budget, s.dec.measured_budget(x)) << depth;
  }
}

TEST(Bfv, ExhaustionIsFlaggedNotSilent) {
  const TestModeGuard guard;
  for (const auto& p : {parameter_set("toy2048"), simulated(parameter_set("toy2048"))}) {
    Session s(p, 18);
    auto x = s.enc.encrypt(3);
    bool flagged = false;
    for (int i = 0; i < 6 && !flagged; ++i) {
      x = s.ev.square(x);
      try {
        s.dec.decrypt(x);
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BudgetExhausted);
        flagged = true;
      }
    }
    EXPECT_TRUE(flagged) << p.name;
  }
}

TEST(Bfv, SimFlagsExhaustionNoLaterThanReal) {
  const TestModeGuard guard;
  for (const auto& p : default_parameter_sets()) {
    Session real(p, 19), sim(simulated(p), 19);
    auto xr = real.enc.encrypt(5), xs = sim.enc.encrypt(5);
    int real_fail = -1, sim_flag = -1;
    for (int depth = 1; depth <= 8 && real_fail < 0; ++depth) {
      xr = real.ev.square(real.ev.mul_plain(xr, 1000));
      xs = sim.ev.square(sim.ev.mul_plain(xs, 1000));
      EXPECT_DOUBLE_EQ(xr.noise_budget, xs.noise_budget);
      try {
        real.dec.decrypt(xr);
      } catch (const Error&) {
        real_fail = depth;
      }
      if (sim_flag < 0) {
        try {
          sim.dec.decrypt(xs);
        } catch (const Error&) {
          sim_flag = depth;
        }
      }
    }
    ASSERT_GT(real_fail, 0) << p.name;
    ASSERT_GT(sim_flag, 0) << p.name;
    EXPECT_LE(sim_flag, real_fail) << p.name;
  }
}

TEST(Bfv, SimAgreesWithRealOnRandomSequences) {
  const auto p = parameter_set("toy2048");
  Session real(p, 20), sim(simulated(p), 20);
  Rng rng(8);
  std::uniform_int_distribution<std::uint64_t> d(0, p.t - 1);
  std::uniform_int_distribution<int> op(0, 3);
  for (int seq = 0; seq < 40; ++seq) {
    const std::uint64_t m0 = d(rng);
    auto r = real.enc.encrypt(m0);
    auto s = sim.enc.encrypt(m0);
    int muls = 0;
    for (int step = 0; step < 4; ++step) {
      const std::uint64_t v = d(rng) % 1000;
      switch (op(rng)) {
        case 0:
          r = real.ev.add(r, real.enc.encrypt(v));
          s = sim.ev.add(s, sim.enc.encrypt(v));
          break;
        case 1:
          r = real.ev.add_plain(r, v);
          s = sim.ev.add_plain(s, v);
          break;
        case 2:
          r = real.ev.mul_plain(r, v);
          s = sim.ev.mul_plain(s, v);
          break;
        default:
          if (muls++ > 0) break;
          r = real.ev.square(r);
          s = sim.ev.square(s);
      }
      if (real.dec.measured_budget(r) <= 0) break;
      ASSERT_EQ(real.dec.decrypt(r), sim.dec.decrypt(s));
      ASSERT_DOUBLE_EQ(r.noise_budget, s.noise_budget);
    }
  }
}

TEST(Bfv, MismatchedParametersAreRejected) {
  Session a(parameter_set("toy2048"), 21), b(parameter_set("mid4096"), 21);
  const auto ca = a.enc.encrypt(1), cb = b.enc.encrypt(1);
  try {
    a.ev.add(ca, cb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParameterMismatch);
  }
  EXPECT_THROW(a.dec.decrypt(cb), Error);
  EXPECT_THROW(a.ev.add(ca, a.ev.mul_plain(ca, 2, 3)), Error);  // scale mismatch
  EXPECT_THROW(a.ev.mul(a.ev.mul(ca, ca), ca), Error);          // needs relinearization first
  const Evaluator no_key(a.keys.pk.context);
  EXPECT_THROW(no_key.relinearize(a.ev.mul(ca, ca)), Error);
}

TEST(Bfv, DotPlainMatchesTheUnfusedSum) {
  for (const auto& p : {parameter_set("toy2048"), simulated(parameter_set("toy2048"))}) {
    Session s(p, 22);
    Rng rng(9);
    std::vector<Ciphertext> xs;
    std::vector<const Ciphertext*> ptrs;
    std::vector<std::uint64_t> ms, ws;
    for (int i = 0; i < 70; ++i) {
      ms.push_back(rng() % 1000);
      ws.push_back(to_residue(static_cast<std::int64_t>(rng() % 255) - 127, p.t));
      xs.push_back(s.enc.encrypt(ms.back()));
    }
    for (const auto& x : xs) ptrs.push_back(&x);
    OpCounts counts;
    s.ev.set_counter(&counts);
    const auto fused = s.ev.dot_plain(ptrs, ws, 17, 5);
    std::uint64_t expect = 17;
    for (std::size_t i = 0; i < ms.size(); ++i) expect = mod_add(expect, mod_mul(ms[i], ws[i], p.t), p.t);
    EXPECT_EQ(s.dec.decrypt(fused), expect);
    EXPECT_EQ(fused.scale_bits, 5);
    EXPECT_EQ(counts.mul_plain.load(), 70u);
    EXPECT_EQ(counts.add.load(), 69u);
    EXPECT_EQ(counts.add_plain.load(), 1u);
  }
}

TEST(Encoding, FixedPointExamples) {
  const std::uint64_t t = parameter_set("mid4096").t;
  EXPECT_EQ(encode_fixed(1.5, 4, t), 24u);
  EXPECT_DOUBLE_EQ(decode_fixed(24, 4, t), 1.5);
  EXPECT_EQ(encode_fixed(-0.25, 4, t), t - 4);
  EXPECT_DOUBLE_EQ(decode_fixed(t - 4, 4, t), -0.25);
  EXPECT_THROW(encode_fixed(1e300, 4, t), Error);
  EXPECT_THROW(encode_fixed(NAN, 4, t), Error);
  const double limit = static_cast<double>((t - 1) / 2);
  EXPECT_NO_THROW(encode_fixed(limit, 0, t));
  EXPECT_THROW(encode_fixed(limit + 1, 0, t), Error);
  Rng rng(10);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    const int s = static_cast<int>(rng() % 20);
    EXPECT_LE(std::fabs(decode_fixed(encode_fixed(v, s, t), s, t) - v), std::ldexp(1.0, -(s + 1)));
  }
}

TEST(Encoding, EncryptedSquareDecodesAtDoubleScale) {
  for (const auto& p : {parameter_set("mid4096"), simulated(parameter_set("mid4096"))}) {
    Session s(p, 23);
    const auto x = s.enc.encrypt(encode_fixed(1.5, 4, p.t), 4);
    const auto sq = s.ev.square(x);
    EXPECT_EQ(sq.scale_bits, 8);
    EXPECT_EQ(s.dec.decrypt(sq), 576u);
    EXPECT_DOUBLE_EQ(decode_fixed(s.dec.decrypt(sq), sq.scale_bits, p.t), 2.25);
  }
}

TEST(Serialization, CiphertextRoundTripIsByteExact) {
  for (const auto& p : {parameter_set("toy2048"), simulated(parameter_set("toy2048"))}) {
    Session s(p, 24);
    for (const auto& ct : {s.enc.encrypt(77, 6), s.ev.mul(s.enc.encrypt(2), s.enc.encrypt(3))}) {
      const auto bytes = serialize(ct);
      const auto back = deserialize_ciphertext(bytes, s.keys.pk.context);
      EXPECT_EQ(serialize(back), bytes);
      EXPECT_EQ(back.scale_bits, ct.scale_bits);
      EXPECT_EQ(back.noise_budget, ct.noise_budget);
      EXPECT_EQ(s.dec.decrypt(back), s.dec.decrypt(ct));
      auto cut = bytes;
      cut.pop_back();
      EXPECT_THROW(deserialize_ciphertext(cut, s.keys.pk.context), Error);
      auto bad = bytes;
      bad[0] ^= 1;
      EXPECT_THROW(deserialize_ciphertext(bad, s.keys.pk.context), Error);
    }
  }
  Session a(parameter_set("toy2048"), 25), b(parameter_set("mid4096"), 25);
  EXPECT_THROW(deserialize_ciphertext(serialize(a.enc.encrypt(1)), b.keys.pk.context), Error);
}

TEST(Serialization, KeysRoundTrip) {
  const auto keys = keygen(parameter_set("toy2048"), 26);
  const auto pk = deserialize_public_key(serialize(keys.pk));
  const auto sk = deserialize_secret_key(serialize(keys.sk));
  const auto ek = deserialize_eval_key(serialize(keys.ek));
  EXPECT_EQ(serialize(pk), serialize(keys.pk));
  EXPECT_EQ(serialize(sk), serialize(keys.sk));
  EXPECT_EQ(serialize(ek), serialize(keys.ek));
  Encryptor enc(pk, 1);
  const Evaluator ev(pk.context, std::make_shared<EvalKey>(ek));
  EXPECT_EQ(Decryptor(sk).decrypt(ev.square(enc.encrypt(12))), 144u);
  // each file type is recognised by its own magic
  EXPECT_THROW(deserialize_secret_key(serialize(keys.pk)), Error);
  EXPECT_THROW(deserialize_public_key(serialize(keys.ek)), Error);
}

TEST(Circuit, EncryptedForwardEqualsFixedPointOracle) {
  Rng rng(27);
  for (bool sigmoid : {false, true}) {
    const auto net = random_dpn(5, 4, 3, rng, sigmoid);
    const auto fx = compile_fixed_point(net, 4, 6);
    for (const auto& p : {parameter_set("mid4096"), simulated(parameter_set("mid4096"))}) {
      Session s(p, 28);
      OpCounts counts;
      s.ev.set_counter(&counts);
      std::uniform_real_distribution<double> u(-2, 2);
      std::vector<double> frame(5);
      for (auto& v : frame) v = u(rng);
      const auto ints = encode_input(fx, frame);
      std::vector<Ciphertext> in;
      for (auto v : ints) in.push_back(s.enc.encrypt(to_residue(v, p.t), fx.input_scale_bits));
      const auto out = encrypted_forward(s.ev, fx, in);
      const auto expect = fixed_point_forward(fx, ints, p.t);
      ASSERT_EQ(out.size(), expect.size());
      double lowest = INFINITY;
      for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_EQ(s.dec.decrypt(out[i]), expect[i]);
        EXPECT_EQ(out[i].scale_bits, fx.output_scale_bits);
        EXPECT_LE(out[i].noise_budget, s.dec.measured_budget(out[i]) + 1e-9);
        lowest = std::min(lowest, out[i].noise_budget);
      }
      EXPECT_NEAR(lowest, static_output_budget(fx, s.ev.context().noise(), p.t), 1e-9);
      EXPECT_GT(counts.mul.load(), 0u);
      EXPECT_EQ(counts.relinearize.load(), counts.mul.load());
    }
  }
}

TEST(Circuit, ConcurrentEvaluationIsDeterministic) {
  Rng rng(29);
  const auto net = random_dpn(4, 3, 2, rng);
  const auto fx = compile_fixed_point(net, 4, 6);
  Session s(parameter_set("toy2048"), 30);
  std::vector<Ciphertext> in;
  for (int i = 0; i < 4; ++i) in.push_back(s.enc.encrypt(static_cast<std::uint64_t>(i + 1), 4));
  const auto reference = encrypted_forward(s.ev, fx, in);
  std::vector<std::vector<Ciphertext>> results(4);
  std::vector<std::thread> threads;
  for (auto& r : results) threads.emplace_back([&] { r = encrypted_forward(s.ev, fx, in); });
  for (auto& th : threads) th.join();
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].parts, reference[i].parts);
}

}  // namespace
}  // namespace polyscore::he
