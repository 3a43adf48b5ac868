#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <random>
#include <thread>

#include "acceptance.hpp"
#include "common/error.hpp"
#include "common/modmath.hpp"
#include "common/random.hpp"
#include "hecrypt/bfv.hpp"
#include "hecrypt/circuit.hpp"
#include "hecrypt/ntt.hpp"
#include "hecrypt/params.hpp"
#include "netcore/fixed_point.hpp"
#include "quantizer/plan.hpp"

namespace polyscore::acceptance {
namespace {

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Layer random_dense(std::size_t out, std::size_t in, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor w({out, in}), b({out});
  for (auto& v : w.data) v = u(rng);
  for (auto& v : b.data) v = 0.5 * u(rng);
  return Layer::dense(std::move(w), std::move(b));
}

// 2 or 3 dense layers of width <= 32 with one or two square activations
// between them, quantized with a fitted codebook plan.
PolyNetwork random_quantized_dpn(Rng& rng, int* squares_out) {
  std::uniform_int_distribution<std::size_t> width(2, 32);
  const std::size_t dense_layers = 2 + rng() % 2;
  const int squares = dense_layers == 2 ? 1 : 1 + static_cast<int>(rng() % 2);
  const std::size_t skipped = squares == 2 ? dense_layers : rng() % (dense_layers - 1);
  const std::size_t input = width(rng);
  std::vector<Layer> layers;
  std::size_t fan_in = input;
  for (std::size_t d = 0; d < dense_layers; ++d) {
    const std::size_t out = width(rng);
    layers.push_back(random_dense(out, fan_in, rng));
    fan_in = out;
    if (d + 1 < dense_layers && d != skipped) layers.push_back(Layer::activation(LayerKind::SquareActivation));
  }
  const PolyNetwork net({input}, std::move(layers));

  const int bits = std::array{2, 4, 8}[rng() % 3];
  std::uniform_real_distribution<double> x(-8.0, 8.0);
  Tensor calibration({256, input});
  for (auto& v : calibration.data) v = x(rng);
  quant::PlanOptions opts;
  opts.include_gradients = false;
  const auto plan = quant::plan_quantization(net, bits, calibration, {}, opts);
  *squares_out = squares;
  return quant::quantize_parameters(net, plan);
}

Outcome encrypted_equals_plaintext() {
  constexpr int kNets = 100, kFrames = 100;
  const he::HeParams params = he::parameter_set("mid4096");
  const auto start = std::chrono::steady_clock::now();

  std::atomic<int> next{0}, mismatches{0}, exhausted{0}, squares_total{0};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (int index; (index = next++) < kNets;) {
      try {
        Rng rng(1000 + static_cast<std::uint64_t>(index));
        int squares = 0;
        const auto net = random_quantized_dpn(rng, &squares);
        const auto fx = he::compile_for_he(net, 8, 8);
        squares_total += squares;
        const auto keys = he::keygen(params, 5000 + static_cast<std::uint64_t>(index));
        he::Encryptor enc(keys.pk, 6000 + static_cast<std::uint64_t>(index));
        const he::Decryptor dec(keys.sk);
        const he::Evaluator ev(keys.pk.context, std::make_shared<he::EvalKey>(keys.ek));
        std::uniform_real_distribution<double> u(-8.0, 8.0);
        for (int f = 0; f < kFrames; ++f) {
          std::vector<double> frame(net.input_size());
          for (auto& v : frame) v = u(rng);
          const auto ints = encode_input(fx, frame);
          std::vector<he::Ciphertext> cts;
          for (auto v : ints) cts.push_back(enc.encrypt(to_residue(v, params.t), fx.input_scale_bits));
          const auto out = he::encrypted_forward(ev, fx, cts);
          const auto expected = fixed_point_forward(fx, ints, params.t);
          for (std::size_t o = 0; o < out.size(); ++o) {
            if (out[o].noise_budget <= 0.0) ++exhausted;
            if (dec.decrypt(out[o]) != expected[o]) ++mismatches;
          }
        }
      } catch (const std::exception& e) {
        const std::lock_guard lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
        ++mismatches;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < worker_count(); ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool exact = mismatches == 0 && exhausted == 0;
  const bool fast = secs < 600.0;
  auto detail = format("%d nets x %d frames at n=4096, %d mismatching outputs, %d exhausted, %d square layers, "
                       "%.0f s on %u threads (target < 600 s)",
                       kNets, kFrames, mismatches.load(), exhausted.load(), squares_total.load(), secs, worker_count());
  if (!first_error.empty()) detail += "; first error: " + first_error;
  return {exact && fast, detail};
}

std::vector<std::uint64_t> schoolbook(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b,
                                      std::uint64_t q) {
  const std::size_t n = a.size();
  std::vector<std::uint64_t> c(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t p = mod_mul(a[i], b[j], q);
      if (i + j < n)
        c[i + j] = mod_add(c[i + j], p, q);
      else
        c[i + j - n] = mod_sub(c[i + j - n], p, q);
    }
  return c;
}

Outcome homomorphic_laws() {
  constexpr int kTriples = 10000;
  const he::HeParams params = he::parameter_set("toy2048");
  const auto keys = he::keygen(params, 21);
  he::Encryptor enc(keys.pk, 22);
  const he::Decryptor dec(keys.sk);
  const he::Evaluator ev(keys.pk.context, std::make_shared<he::EvalKey>(keys.ek));
  const std::uint64_t t = params.t;
  Rng rng(23);
  std::uniform_int_distribution<std::uint64_t> d(0, t - 1);
  int wrong = 0, skipped = 0;
  for (int i = 0; i < kTriples; ++i) {
    const std::uint64_t a = d(rng), b = d(rng), c = d(rng);
    const auto ca = enc.encrypt(a), cb = enc.encrypt(b);
    const auto sum = ev.add(ca, cb);
    const auto scaled = ev.mul_plain(ca, c);
    const auto prod = ev.relinearize(ev.mul(ca, cb));
    if (std::min({sum.noise_budget, scaled.noise_budget, prod.noise_budget}) <= 0.0) {
      ++skipped;
      continue;
    }
    if (dec.decrypt(sum) != mod_add(a, b, t) || dec.decrypt(scaled) != mod_mul(a, c, t) ||
        dec.decrypt(prod) != mod_mul(a, b, t))
      ++wrong;
  }

  int ntt_wrong = 0, ntt_cases = 0;
  for (std::size_t n = 2; n <= 256; n *= 2)
    for (int bits : {20, 40, 60}) {
      const std::uint64_t q = he::find_primes(bits, 2 * n, 1).front();
      const he::NttTables tables(n, he::Modulus(q));
      std::uniform_int_distribution<std::uint64_t> dq(0, q - 1);
      for (int trial = 0; trial < 5; ++trial, ++ntt_cases) {
        std::vector<std::uint64_t> a(n), b(n);
        for (auto& v : a) v = dq(rng);
        for (auto& v : b) v = dq(rng);
        if (he::negacyclic_multiply(a, b, tables) != schoolbook(a, b, q)) ++ntt_wrong;
      }
    }
  return {wrong == 0 && skipped < kTriples && ntt_wrong == 0,
          format("%d op triples on toy2048, %d wrong, %d skipped for budget; NTT vs schoolbook %d/%d exact (n 2..256)",
                 kTriples, wrong, skipped, ntt_cases - ntt_wrong, ntt_cases)};
}

}  // namespace

std::vector<Criterion> he_criteria() {
  return {{1, "encrypted scores equal the fixed-point forward", encrypted_equals_plaintext},
          {2, "homomorphic law suite", homomorphic_laws}};
}

}  // namespace polyscore::acceptance
