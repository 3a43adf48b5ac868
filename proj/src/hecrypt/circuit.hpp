#pragma once

#include <vector>

#include "hecrypt/bfv.hpp"
#include "netcore/fixed_point.hpp"

namespace polyscore::he {

/// Runs the integer circuit on one encrypted frame. Only add, add_plain,
/// mul_plain, mul and relinearize are used; weights stay in plaintext.
std::vector<Ciphertext> encrypted_forward(const Evaluator& ev, const FixedPointNetwork& net,
                                          const std::vector<Ciphertext>& inputs);

/// Smallest static budget among the outputs for fresh inputs, following the
/// same bookkeeping the evaluator applies.
double static_output_budget(const FixedPointNetwork& net, const NoiseModel& model, std::uint64_t t);

}  // namespace polyscore::he
