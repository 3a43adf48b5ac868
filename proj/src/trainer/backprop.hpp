#pragma once

#include <vector>

#include "netcore/network.hpp"
#include "quantizer/codebook.hpp"

namespace polyscore::quant {
struct QuantizationPlan;
}

namespace polyscore::train {

/// Per-layer gradients laid out like Layer::params (empty for parameter-free layers).
using ParamGrads = std::vector<std::vector<Tensor>>;

/// Optional quantizers applied during a forward/backward pass. Null entries
/// mean "leave in float". Vectors are either empty or one entry per layer.
struct QuantHooks {
  const quant::Codebook* input = nullptr;
  std::vector<const quant::Codebook*> activations;       // applied to each layer's output
  std::vector<const quant::Codebook*> activation_grads;  // applied to dL/d(layer output)
};

/// Hooks for a plan's input/activation codebooks, and optionally its gradient codebooks.
QuantHooks hooks_for(const quant::QuantizationPlan& plan, std::size_t layers, bool gradients);

struct BackwardResult {
  double loss = 0.0;
  std::size_t predicted = 0;
  ParamGrads grads;
  /// activations[0] is the (possibly quantized) input, activations[i+1] the output of layer i.
  std::vector<Tensor> activations;
  /// output_grads[i] is dL/d(output of layer i) before any quantization hook.
  std::vector<Tensor> output_grads;
};

/// Softmax cross-entropy loss of `scores` against `label`. If the network
/// already ends with a Softmax layer, pass `probabilities = true`.
double cross_entropy(std::span<const double> scores, std::size_t label, bool probabilities = false);

/// Forward pass with quantization hooks, returning the trace.
std::vector<Tensor> forward_trace_quantized(const PolyNetwork& net, const Tensor& x, const QuantHooks* hooks);

BackwardResult backward_detailed(const PolyNetwork& net, const Tensor& x, std::size_t label,
                                 const QuantHooks* hooks = nullptr);

/// Gradients of softmax cross-entropy w.r.t. every parameter.
ParamGrads backward(const PolyNetwork& net, const Tensor& x, std::size_t label);

/// dL/dx of one layer given its input and dL/dy; accumulates parameter gradients into `param_grads`.
Tensor layer_backward(const Layer& layer, const Tensor& x, const Tensor& y, const Tensor& dy,
                      std::vector<Tensor>* param_grads);

}  // namespace polyscore::train
