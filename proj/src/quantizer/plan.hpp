#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "netcore/network.hpp"
#include "quantizer/codebook.hpp"

namespace polyscore::quant {

enum class TensorRole { Weights, Bias, Activations, WeightGradients, ActivationGradients };
inline constexpr std::size_t kRoleCount = 5;

const char* to_string(TensorRole role);
TensorRole tensor_role_from_string(const std::string& name);

using CodebookPtr = std::shared_ptr<const Codebook>;

struct LayerQuantization {
  std::array<CodebookPtr, kRoleCount> roles{};
  const CodebookPtr& operator[](TensorRole r) const { return roles[static_cast<std::size_t>(r)]; }
  CodebookPtr& operator[](TensorRole r) { return roles[static_cast<std::size_t>(r)]; }
};

/// One codebook per quantizable tensor: weights and bias of every parametric
/// layer (gradients of both share the weight-gradient codebook), each block's
/// activation after its nonlinearity and that activation's gradient, plus the
/// network input frame.
struct QuantizationPlan {
  int bits = 8;
  CodebookPtr input;
  std::vector<LayerQuantization> layers;

  const Codebook* get(std::size_t layer, TensorRole role) const;
  std::size_t codebook_count() const;
};

/// Whether the output of layer `index` is a quantized activation: every layer
/// output except one that feeds straight into an elementwise nonlinearity and
/// the final class scores.
bool quantizes_activation(const PolyNetwork& net, std::size_t index);

struct PlanOptions {
  /// Frames from the calibration batch used for activation/gradient histograms.
  std::size_t calibration_frames = 10000;
  bool quantize_input = true;
  bool include_gradients = true;
  /// Weight-gradient codebooks are fitted on minibatch-mean gradients of this size.
  std::size_t minibatch_size = 64;
};

/// Fits every codebook of the plan. `calibration` is [frames, input dims...];
/// `labels` (optional) drive the gradient histograms, otherwise the network's
/// own top-1 decision is used as the target.
QuantizationPlan plan_quantization(const PolyNetwork& net, int bits, const Tensor& calibration,
                                   std::span<const std::size_t> labels = {}, const PlanOptions& options = {});

/// Refits only the gradient codebooks of an existing plan.
void refresh_gradient_codebooks(QuantizationPlan& plan, const PolyNetwork& net, const Tensor& calibration,
                                std::span<const std::size_t> labels, std::size_t frames,
                                std::size_t minibatch_size);

/// Weights and biases replaced by their centroids.
PolyNetwork quantize_parameters(const PolyNetwork& net, const QuantizationPlan& plan);

/// Forward with quantized parameters, input, and activations.
Tensor quantized_forward(const PolyNetwork& quantized_net, const QuantizationPlan& plan, const Tensor& x);

}  // namespace polyscore::quant
