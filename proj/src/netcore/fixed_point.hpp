#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "netcore/network.hpp"

namespace polyscore {

/// One output of a linear stage: sparse integer weights over the stage input
/// plus a real bias applied at the stage's output scale.
struct LinearRow {
  std::vector<std::pair<std::uint32_t, std::int64_t>> terms;
  double bias = 0.0;
};

enum class FixedOpKind { Linear, Square, SigmoidPoly };

/// Integer-circuit stage. Scales are powers of two: a value v is carried as
/// the integer round(v * 2^scale_bits).
struct FixedPointOp {
  FixedOpKind kind = FixedOpKind::Linear;
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  int in_scale_bits = 0;
  int out_scale_bits = 0;
  // Linear
  std::vector<LinearRow> rows;
  // SigmoidPoly: cubic coefficient as integer at `coeff_bits`
  int coeff_bits = 0;
  std::int64_t cubic_coeff = 0;
};

/// A HE-compatible network lowered to integer arithmetic. This is the exact
/// computation the encrypted evaluator performs, modulo the plaintext modulus.
struct FixedPointNetwork {
  int input_scale_bits = 0;
  int weight_scale_bits = 0;
  std::size_t input_size = 0;
  std::size_t output_size = 0;
  int output_scale_bits = 0;
  std::vector<FixedPointOp> ops;
};

FixedPointNetwork compile_fixed_point(const PolyNetwork& net, int input_scale_bits, int weight_scale_bits);

/// Integer encoding of a real input frame at the network's input scale.
std::vector<std::int64_t> encode_input(const FixedPointNetwork& net, std::span<const double> x);

/// round(bias * 2^scale_bits) mod t.
std::uint64_t bias_residue(double bias, int scale_bits, std::uint64_t t);

/// Plaintext reference: the integer circuit evaluated mod t.
std::vector<std::uint64_t> fixed_point_forward(const FixedPointNetwork& net, std::span<const std::int64_t> x,
                                               std::uint64_t t);

/// Real-valued decode of integer outputs (centered mod t).
std::vector<double> decode_outputs(const FixedPointNetwork& net, std::span<const std::uint64_t> outputs,
                                   std::uint64_t t);

/// The network whose float forward equals the integer circuit: weights snapped
/// to the 2^-weight_scale_bits grid.
PolyNetwork snap_to_fixed_point(const PolyNetwork& net, int weight_scale_bits);

}  // namespace polyscore
