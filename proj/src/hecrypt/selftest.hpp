#pragma once

#include <cstdint>
#include <string>

#include "hecrypt/params.hpp"

namespace polyscore::he {

struct DifferentialReport {
  std::string params;
  std::size_t sequences = 0;
  std::size_t operations = 0;
  /// Decryptions compared while the real ciphertext still had measured budget.
  std::size_t compared = 0;
  std::size_t value_mismatches = 0;
  std::size_t budget_mismatches = 0;
  /// Steps where the static budget claimed headroom the real ciphertext lacked.
  std::size_t optimistic_budgets = 0;

  bool passed() const { return value_mismatches == 0 && budget_mismatches == 0 && optimistic_budgets == 0; }
  std::string summary() const;
};

/// Runs the same random operation sequences on the real and simulated
/// backends of `params` and compares decrypted values and static budgets.
DifferentialReport sim_real_differential(const HeParams& params, std::size_t sequences, std::uint64_t seed);

}  // namespace polyscore::he
