#pragma once

#include <vector>

#include "netcore/layer.hpp"

namespace polyscore {

/// Ordered, shape-checked layer stack. Immutable after construction; every
/// transformation returns a new network.
class PolyNetwork {
 public:
  PolyNetwork() = default;
  PolyNetwork(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t output_dim() const { return output_dim_; }
  std::size_t input_size() const { return numel(input_shape_); }

  /// True iff every layer is one of Dense, Conv, SquareActivation, SigmoidPoly, ScaledMeanPool.
  bool he_compatible() const { return he_compatible_; }

  /// Input shape of layer `index` (index == layers().size() gives the output shape).
  const Shape& shape_at(std::size_t index) const { return shapes_[index]; }

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
  std::size_t output_dim_ = 0;
  bool he_compatible_ = false;
};

struct MultiplicativeDepth {
  int depth = 0;
};

Tensor forward(const PolyNetwork& net, const Tensor& x);

/// Per-layer activations: element 0 is the input, element i+1 the output of layer i.
std::vector<Tensor> forward_trace(const PolyNetwork& net, const Tensor& x);

MultiplicativeDepth multiplicative_depth(const PolyNetwork& net);

/// Absorbs every BatchNorm into an adjacent Dense/Conv layer.
PolyNetwork fold_batchnorm(const PolyNetwork& net);

/// ReLU -> square, Sigmoid -> cubic surrogate, MaxPool -> window sum,
/// BatchNorm folded, Softmax removed. Weights are copied unchanged.
PolyNetwork convert_to_dpn(const PolyNetwork& net);

/// Returns a copy of `net` with new parameter tensors for every parametric layer
/// (same order as `net.layers()`, empty vectors for parameter-free layers).
PolyNetwork with_parameters(const PolyNetwork& net, const std::vector<std::vector<Tensor>>& params);

std::size_t argmax(std::span<const double> scores);

}  // namespace polyscore
