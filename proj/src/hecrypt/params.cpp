#include "hecrypt/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "common/error.hpp"
#include "hecrypt/modulus.hpp"
#include "netcore/fixed_point.hpp"

namespace polyscore::he {

namespace {

double log2_sum(double a, double b) {
  const double hi = std::max(a, b), lo = std::min(a, b);
  if (lo == -INFINITY) return hi;
  return hi + std::log2(1.0 + std::exp2(lo - hi));
}

// invariant noise <-> budget
double noise_log2(double budget) { return -1.0 - budget; }
double budget_of(double noise) { return -1.0 - noise; }

HeParams make_set(const std::string& name, std::size_t n, std::size_t primes, int prime_bits, int t_bits, int w) {
  HeParams p;
  p.name = name;
  p.n = n;
  p.decomposition_base_bits = w;
  p.moduli = find_primes(prime_bits, 2 * n, primes);
  p.t = find_primes(t_bits, 2 * n, 1, p.moduli).front();
  p.validate();
  return p;
}

}  // namespace

const char* to_string(Backend backend) { return backend == Backend::Bfv ? "bfv" : "sim"; }

Backend backend_from_string(const std::string& name) {
  if (name == "bfv") return Backend::Bfv;
  if (name == "sim") return Backend::Sim;
  raise(ErrorCode::Config, "unknown backend '" + name + "' (expected bfv or sim)");
}

HeParams simulated(HeParams params) {
  params.backend = Backend::Sim;
  return params;
}

void HeParams::validate() const {
  require(n >= 2 && (n & (n - 1)) == 0, ErrorCode::InvalidArgument, "ring degree must be a power of two");
  require(!moduli.empty(), ErrorCode::InvalidArgument, "ciphertext modulus needs at least one prime");
  for (std::size_t i = 0; i < moduli.size(); ++i) {
    const auto q = moduli[i];
    require(q < (std::uint64_t{1} << 61) && is_prime(q), ErrorCode::InvalidArgument, "moduli must be primes below 2^61");
    require((q - 1) % (2 * n) == 0, ErrorCode::InvalidArgument, "moduli must be 1 mod 2n");
    for (std::size_t j = 0; j < i; ++j)
      require(moduli[j] != q, ErrorCode::InvalidArgument, "moduli must be distinct");
  }
  require(t >= 2 && is_prime(t), ErrorCode::InvalidArgument, "plaintext modulus must be prime");
  require(std::log2(static_cast<double>(t)) + 8 < log2_q(), ErrorCode::InvalidArgument, "t must be far below q");
  for (auto q : moduli) require(q != t, ErrorCode::InvalidArgument, "t must differ from the ciphertext primes");
  require(error_stddev > 0.0, ErrorCode::InvalidArgument, "error deviation must be positive");
  require(decomposition_base_bits >= 1 && decomposition_base_bits <= 61, ErrorCode::InvalidArgument,
          "decomposition base bits must lie in [1, 61]");
}

double HeParams::log2_q() const {
  double s = 0.0;
  for (auto q : moduli) s += std::log2(static_cast<double>(q));
  return s;
}

bool HeParams::operator==(const HeParams& o) const {
  return n == o.n && moduli == o.moduli && t == o.t && error_stddev == o.error_stddev &&
         decomposition_base_bits == o.decomposition_base_bits && backend == o.backend;
}

NoiseModel NoiseModel::for_params(const HeParams& p) {
  const double lq = p.log2_q();
  const double lt = std::log2(static_cast<double>(p.t));
  const double ln = std::log2(static_cast<double>(p.n));
  const double bound = 6.0 * p.error_stddev;  // tail cut of the error sampler
  NoiseModel m;
  // e*u + e1 + e2*s with ternary u, s, plus rounding of q*m/t.
  m.fresh_budget = budget_of(lt - lq + std::log2(bound * (2.0 * static_cast<double>(p.n) + 1.0) + 0.5));
  // Tensoring multiplies invariant noise by about t*n*sqrt(n)/8 on average and
  // t*n^2 in the worst case; 8*t*n per operand is conservative for ternary
  // keys at these sizes and is checked against measured noise in tests.
  m.mul_cost = lt + ln + 4.0;
  m.plain_add_noise = lt - lq - 1.0;
  // sum over digits of digit * e: (count of digits) * 2^w * n * bound, scaled by t/q.
  // The simulation backend charges the same so both report identical budgets.
  double digits = 0.0;
  for (auto q : p.moduli) digits += std::ceil(std::log2(static_cast<double>(q)) / p.decomposition_base_bits);
  m.relin_noise = lt - lq + std::log2(digits * bound * static_cast<double>(p.n)) + std::min(p.decomposition_base_bits, 61);
  return m;
}

int NoiseModel::depth_capacity() const {
  const double usable = fresh_budget - linear_reserve;
  if (usable <= 0.0) return 0;
  return static_cast<int>(std::floor(usable / mul_cost));
}

double NoiseModel::add(double a, double b) { return budget_of(log2_sum(noise_log2(a), noise_log2(b))); }

double NoiseModel::add_plain(double budget) const { return budget_of(log2_sum(noise_log2(budget), plain_add_noise)); }

double NoiseModel::mul_plain(double budget, double l1) {
  if (l1 <= 1.0) return budget;
  return budget - std::log2(l1);
}

double NoiseModel::mul(double a, double b) const {
  // (v_a + v_b) * 2^(mul_cost - 1): equal inputs cost exactly mul_cost
  return budget_of(log2_sum(noise_log2(a), noise_log2(b)) + mul_cost - 1.0);
}

double NoiseModel::relinearize(double budget) const {
  return budget_of(log2_sum(noise_log2(budget), relin_noise));
}

const std::vector<HeParams>& default_parameter_sets() {
  static const std::vector<HeParams> sets = {
      // One relinearization digit per limb costs nothing measurable once Q has
      // more than two limbs; the two-limb set keeps a smaller base for headroom.
      make_set("toy2048", 2048, 2, 60, 30, 30),
      make_set("mid4096", 4096, 4, 60, 47, 60),
      make_set("big8192", 8192, 6, 60, 50, 60),
  };
  return sets;
}

const HeParams& parameter_set(const std::string& name) {
  for (const auto& p : default_parameter_sets())
    if (p.name == name) return p;
  raise(ErrorCode::Config, "unknown parameter set '" + name + "' (expected toy2048, mid4096 or big8192)");
}

std::vector<std::string> parameter_set_names() {
  std::vector<std::string> out;
  for (const auto& p : default_parameter_sets()) out.push_back(p.name);
  return out;
}

int weight_scale_for(const PolyNetwork& net, int weight_bits) {
  require(weight_bits >= 2 && weight_bits <= 24, ErrorCode::InvalidArgument, "weight bits must lie in [2, 24]");
  double max_abs = 0.0;
  for (const auto& layer : net.layers())
    if (layer.kind == LayerKind::Dense || layer.kind == LayerKind::Conv)
      for (double v : layer.params[0].data) max_abs = std::max(max_abs, std::fabs(v));
  return input_scale_for(max_abs, weight_bits);
}

int input_scale_for(double max_abs, int bits) {
  require(bits >= 2 && bits <= 24, ErrorCode::InvalidArgument, "bit width must lie in [2, 24]");
  require(std::isfinite(max_abs) && max_abs >= 0.0, ErrorCode::InvalidArgument, "range must be finite");
  const double limit = std::ldexp(1.0, bits - 1) - 1.0;
  if (max_abs == 0.0) return 24;
  int s = static_cast<int>(std::floor(std::log2(limit / max_abs)));
  while (s > -64 && std::nearbyint(std::ldexp(max_abs, s)) > limit) --s;
  while (s < 24 && std::nearbyint(std::ldexp(max_abs, s + 1)) <= limit) ++s;
  return std::clamp(s, 0, 24);
}

MagnitudeBound magnitude_bound(const PolyNetwork& net, int input_bits, int weight_bits) {
  require(net.he_compatible(), ErrorCode::Unsupported, "parameter planning needs an HE-compatible network");
  require(input_bits >= 2 && input_bits <= 24, ErrorCode::InvalidArgument, "input bits must lie in [2, 24]");
  const auto fx = compile_for_he(net, input_bits, weight_bits);

  MagnitudeBound out;
  out.depth = multiplicative_depth(net).depth;
  std::vector<double> b(fx.input_size, std::ldexp(1.0, input_bits - 1));
  double overall = 0.0;
  for (const auto& op : fx.ops) {
    std::vector<double> next(op.out_size, 0.0);
    switch (op.kind) {
      case FixedOpKind::Linear:
        for (std::size_t j = 0; j < op.out_size; ++j) {
          double acc = std::fabs(std::nearbyint(std::ldexp(op.rows[j].bias, op.out_scale_bits)));
          for (const auto& [idx, w] : op.rows[j].terms) acc += std::fabs(static_cast<double>(w)) * b[idx];
          next[j] = acc;
        }
        break;
      case FixedOpKind::Square:
        for (std::size_t j = 0; j < op.out_size; ++j) next[j] = b[j] * b[j];
        break;
      case FixedOpKind::SigmoidPoly: {
        const int s = op.in_scale_bits;
        for (std::size_t j = 0; j < op.out_size; ++j)
          next[j] = std::fabs(static_cast<double>(op.cubic_coeff)) * b[j] * b[j] * b[j] +
                    std::ldexp(b[j], 2 * s + op.coeff_bits - 2) + std::ldexp(1.0, 3 * s + op.coeff_bits - 1);
        break;
      }
    }
    const double m = next.empty() ? 0.0 : *std::max_element(next.begin(), next.end());
    out.per_layer_log2.push_back(m > 0.0 ? std::log2(m) : -INFINITY);
    overall = std::max(overall, m);
    b = std::move(next);
  }
  out.log2_bound = overall > 0.0 ? std::log2(overall) : 0.0;
  return out;
}

FixedPointNetwork compile_for_he(const PolyNetwork& net, int input_bits, int weight_bits) {
  return compile_fixed_point(net, input_scale_for(8.0, input_bits), weight_scale_for(net, weight_bits));
}

std::vector<HeParams> fitting_parameter_sets(const PolyNetwork& net, int input_bits, int weight_bits) {
  const auto bound = magnitude_bound(net, input_bits, weight_bits);
  std::vector<HeParams> out;
  for (const auto& p : default_parameter_sets()) {
    const auto model = NoiseModel::for_params(p);
    const bool wide_enough = bound.log2_bound + 1.0 < std::log2(static_cast<double>(p.t));
    if (wide_enough && model.depth_capacity() >= bound.depth) out.push_back(p);
  }
  return out;
}

HeParams plan_parameters(const PolyNetwork& net, int input_bits, int weight_bits) {
  const auto fits = fitting_parameter_sets(net, input_bits, weight_bits);
  if (!fits.empty()) return fits.front();
  const auto bound = magnitude_bound(net, input_bits, weight_bits);
  std::ostringstream os;
  os << "no parameter set fits: magnitude bound 2^" << bound.log2_bound << ", multiplicative depth " << bound.depth;
  raise(ErrorCode::NoParameterSet, os.str());
}

}  // namespace polyscore::he
