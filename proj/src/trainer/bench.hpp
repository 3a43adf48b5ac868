#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace polyscore::train {

struct BenchConfig {
  std::vector<int> bits = {16, 8, 4, 2};
  std::uint64_t seed = 1;
  std::uint64_t task_seed = 1;
  int retrain_epochs = 10;
};

/// Toy-task accuracy grid: a ReLU network, its polynomial conversion after
/// float fine-tuning, and for every bit width the quantize-only and retrained
/// held-out accuracy.
struct BenchResult {
  double relu = 0.0;
  double dpn = 0.0;
  std::vector<int> bits;
  std::vector<double> quantize_only;
  std::vector<double> retrained;

  /// Rows float-relu, float-dpn, quantize-only, quantize+retrain; one column per width.
  std::string csv() const;
  /// Quantize-only accuracy never rises as the width shrinks.
  bool quantize_only_monotone() const;
};

BenchResult run_bench(const BenchConfig& cfg);

}  // namespace polyscore::train
