#pragma once

#include <string>
#include <vector>

#include "netcore/tensor.hpp"

namespace polyscore {

enum class LayerKind {
  Dense,
  Conv,
  BatchNorm,
  SquareActivation,
  SigmoidPoly,
  ScaledMeanPool,
  ReLU,
  Sigmoid,
  MaxPool,
  Softmax,
};

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// Kinds a homomorphic evaluator can run directly.
bool is_he_kind(LayerKind kind);
bool has_parameters(LayerKind kind);
bool is_elementwise(LayerKind kind);

enum class Padding { Valid, Same };

struct ConvGeometry {
  int stride = 1;
  Padding padding = Padding::Valid;
};

/// Non-overlapping pooling window; stride equals the window.
struct PoolGeometry {
  std::size_t window_h = 1;
  std::size_t window_w = 1;
};

/// One network operation. Parameter layout by kind:
///   Dense     {W [out, in], b [out]}
///   Conv      {K [out_ch, in_ch, kh, kw], b [out_ch]}
///   BatchNorm {gamma, beta, mean, stddev}, one entry per feature (rank-1 input) or channel (rank-3 input)
/// All other kinds carry no parameters.
struct Layer {
  LayerKind kind = LayerKind::Dense;
  std::vector<Tensor> params;
  ConvGeometry conv;
  PoolGeometry pool;

  static Layer dense(Tensor weights, Tensor bias);
  static Layer conv2d(Tensor kernel, Tensor bias, ConvGeometry geometry = {});
  static Layer batch_norm(Tensor gamma, Tensor beta, Tensor mean, Tensor stddev);
  static Layer activation(LayerKind kind);
  static Layer pooling(LayerKind kind, std::size_t window_h, std::size_t window_w);

  /// Shape produced for input shape `in`; throws on inconsistent geometry.
  Shape output_shape(const Shape& in) const;

  /// Checks parameter shapes against each other (not against an input).
  void validate() const;
};

/// Forward evaluation of one layer in double precision.
Tensor layer_forward(const Layer& layer, const Tensor& x);

/// The cubic surrogate 1/2 + z/4 - z^3/48 used in place of the logistic sigmoid.
double sigmoid_poly(double z);
double sigmoid_poly_derivative(double z);

/// Per-element channel index used by BatchNorm for the given input shape.
std::size_t batchnorm_channel(const Shape& in, std::size_t element);
std::size_t batchnorm_width(const Shape& in);

struct ConvPlan {
  std::size_t in_c, in_h, in_w, out_c, out_h, out_w, k_h, k_w;
  int stride;
  std::size_t pad_top, pad_left;
};
ConvPlan plan_conv(const Layer& layer, const Shape& in);

}  // namespace polyscore
