#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "netcore/tensor.hpp"

namespace polyscore::train {

/// Frames [count, dims...] with one class label each.
struct LabeledFrames {
  Tensor frames;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t frame_size() const { return frames.size() / std::max<std::size_t>(labels.size(), 1); }
  void validate() const;
};

struct ToyTask {
  LabeledFrames train;
  LabeledFrames test;
  std::size_t classes = 0;
  std::size_t dims = 0;
};

struct ToyTaskConfig {
  std::size_t classes = 10;
  std::size_t dims = 40;
  std::size_t train_frames = 50000;
  std::size_t test_frames = 5000;
  std::size_t modes_per_class = 2;
  double mean_spread = 0.5;
  double noise = 1.0;
};

/// Synthetic frame-classification task: each class is a mixture of Gaussian
/// blobs around random centres; features are standardized with training-set
/// statistics. Class counts are exactly uniform. Deterministic per seed.
ToyTask make_toy_task(std::uint64_t seed, const ToyTaskConfig& cfg = {});

}  // namespace polyscore::train
