#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "netcore/fixed_point.hpp"
#include "netcore/network.hpp"

namespace polyscore::he {

/// Bfv is the lattice scheme; Sim mirrors its value semantics and noise
/// accounting with plain integers mod t and provides no security.
enum class Backend { Bfv, Sim };

const char* to_string(Backend backend);
Backend backend_from_string(const std::string& name);

/// Ring and modulus parameters of the leveled scheme. The ciphertext modulus
/// q is the product of the word-sized primes in `moduli`.
struct HeParams {
  std::string name = "custom";
  std::size_t n = 4096;
  std::vector<std::uint64_t> moduli;
  std::uint64_t t = 0;
  double error_stddev = 3.2;
  int decomposition_base_bits = 16;
  Backend backend = Backend::Bfv;

  void validate() const;
  double log2_q() const;
  bool operator==(const HeParams& other) const;
  bool operator!=(const HeParams& other) const { return !(*this == other); }
};

/// Static (key-independent) noise accounting. Budgets are in bits:
/// budget = -log2(2 * invariant_noise); a ciphertext decrypts correctly while
/// the budget is positive.
struct NoiseModel {
  double fresh_budget = 0.0;
  /// Bits consumed by one ciphertext-ciphertext multiplication plus relinearization.
  double mul_cost = 0.0;
  /// log2 of the rounding noise added by a plaintext addition.
  double plain_add_noise = 0.0;
  /// log2 of the key-switching noise added by one relinearization.
  double relin_noise = -INFINITY;
  /// Budget reserved for the linear layers when quoting a depth capacity.
  double linear_reserve = 24.0;

  static NoiseModel for_params(const HeParams& p);

  /// Number of multiplications a fresh ciphertext can absorb with the linear reserve left over.
  int depth_capacity() const;

  static double add(double budget_a, double budget_b);
  double add_plain(double budget) const;
  /// Budget after multiplying by plaintext scalar(s) whose magnitudes sum to `l1` (0 allowed).
  static double mul_plain(double budget, double l1);
  double mul(double budget_a, double budget_b) const;
  double relinearize(double budget) const;
};

/// Built-in parameter sets: toy2048, mid4096, big8192.
const std::vector<HeParams>& default_parameter_sets();
const HeParams& parameter_set(const std::string& name);
std::vector<std::string> parameter_set_names();
/// The same parameters on the simulation backend.
HeParams simulated(HeParams params);

/// Fixed-point scales for a network: `weight_scale_bits` is the finest scale
/// at which every Dense/Conv weight fits a signed `weight_bits` word.
int weight_scale_for(const PolyNetwork& net, int weight_bits);
/// Finest scale at which |x| <= max_abs fits a signed `bits` word.
int input_scale_for(double max_abs, int bits);

struct MagnitudeBound {
  /// log2 of the largest integer magnitude reached by any layer.
  double log2_bound = 0.0;
  std::vector<double> per_layer_log2;
  int depth = 0;
};

/// Interval arithmetic over the integer circuit: inputs bounded by
/// 2^(input_bits-1), weights snapped at the weight scale for `weight_bits`.
MagnitudeBound magnitude_bound(const PolyNetwork& net, int input_bits, int weight_bits);

/// The integer circuit served for a network: weights at the weight scale for
/// `weight_bits`, inputs at the finest scale holding |x| < 8 in `input_bits`
/// (features are standardized).
FixedPointNetwork compile_for_he(const PolyNetwork& net, int input_bits, int weight_bits);

/// Built-in sets, smallest first, whose t and depth capacity fit the network.
std::vector<HeParams> fitting_parameter_sets(const PolyNetwork& net, int input_bits, int weight_bits);

/// Smallest built-in set whose t exceeds twice the magnitude bound and whose
/// depth capacity covers the network; throws NoParameterSet otherwise.
HeParams plan_parameters(const PolyNetwork& net, int input_bits, int weight_bits);

}  // namespace polyscore::he
