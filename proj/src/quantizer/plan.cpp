#include "quantizer/plan.hpp"

#include <algorithm>

#include "common/error.hpp"
#include "trainer/backprop.hpp"

namespace polyscore::quant {

namespace {

constexpr const char* kRoleNames[kRoleCount] = {"weights", "bias", "activations", "weight-gradients",
                                                 "activation-gradients"};

std::size_t frame_count(const PolyNetwork& net, const Tensor& calibration) {
  require(calibration.rank() >= 2, ErrorCode::ShapeMismatch, "calibration batch must be [frames, dims...]");
  const Shape frame(calibration.shape.begin() + 1, calibration.shape.end());
  require(numel(frame) == net.input_size(), ErrorCode::ShapeMismatch,
          "calibration frame shape " + shape_string(frame) + " does not match network input " +
              shape_string(net.input_shape()));
  require(calibration.shape[0] > 0, ErrorCode::InvalidArgument, "calibration batch is empty");
  return calibration.shape[0];
}

CodebookPtr fit(std::span<const double> samples, int bits) {
  return std::make_shared<const Codebook>(fit_codebook(samples, bits));
}

void fit_gradients(QuantizationPlan& plan, const PolyNetwork& net, const Tensor& calibration,
                   std::span<const std::size_t> labels, std::size_t frames, std::size_t minibatch) {
  require(minibatch > 0, ErrorCode::InvalidArgument, "minibatch size must be positive");
  const auto n = std::min(frames, frame_count(net, calibration));
  require(labels.empty() || labels.size() >= n, ErrorCode::ShapeMismatch, "fewer labels than calibration frames");
  const auto& layers = net.layers();
  const PolyNetwork qnet = quantize_parameters(net, plan);
  // Forward uses the quantized model; gradients themselves are recorded unquantized.
  train::QuantHooks hooks = train::hooks_for(plan, layers.size(), false);
  std::vector<std::vector<double>> act_grads(layers.size()), param_grads(layers.size());
  std::vector<std::vector<double>> batch_sum(layers.size());
  std::size_t in_batch = 0;
  auto flush = [&] {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (double v : batch_sum[l]) param_grads[l].push_back(v / static_cast<double>(in_batch));
      std::fill(batch_sum[l].begin(), batch_sum[l].end(), 0.0);
    }
    in_batch = 0;
  };
  for (std::size_t f = 0; f < n; ++f) {
    const Tensor x = slice_row(calibration, f);
    std::size_t label;
    if (labels.empty()) {
      label = argmax(train::forward_trace_quantized(qnet, x, &hooks).back().values());
    } else {
      label = labels[f];
    }
    const auto r = train::backward_detailed(qnet, x, label, &hooks);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& g = r.output_grads[l].data;
      act_grads[l].insert(act_grads[l].end(), g.begin(), g.end());
      std::size_t k = 0;
      for (const auto& pg : r.grads[l]) {
        if (batch_sum[l].size() < k + pg.size()) batch_sum[l].resize(k + pg.size(), 0.0);
        for (double v : pg.data) batch_sum[l][k++] += v;
      }
    }
    if (++in_batch == minibatch) flush();
  }
  if (in_batch > 0) flush();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (quantizes_activation(net, l)) plan.layers[l][TensorRole::ActivationGradients] = fit(act_grads[l], plan.bits);
    if (!param_grads[l].empty()) plan.layers[l][TensorRole::WeightGradients] = fit(param_grads[l], plan.bits);
  }
}

}  // namespace

bool quantizes_activation(const PolyNetwork& net, std::size_t index) {
  const auto& layers = net.layers();
  if (index + 1 >= layers.size()) return false;
  return !is_elementwise(layers[index + 1].kind);
}

const char* to_string(TensorRole role) { return kRoleNames[static_cast<std::size_t>(role)]; }

TensorRole tensor_role_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kRoleCount; ++i)
    if (name == kRoleNames[i]) return static_cast<TensorRole>(i);
  raise(ErrorCode::InvalidArgument, "unknown tensor role '" + name + "'");
}

const Codebook* QuantizationPlan::get(std::size_t layer, TensorRole role) const {
  if (layer >= layers.size()) return nullptr;
  return layers[layer][role].get();
}

std::size_t QuantizationPlan::codebook_count() const {
  std::size_t n = input ? 1 : 0;
  for (const auto& l : layers)
    for (const auto& cb : l.roles) n += cb ? 1 : 0;
  return n;
}

PolyNetwork quantize_parameters(const PolyNetwork& net, const QuantizationPlan& plan) {
  std::vector<std::vector<Tensor>> params(net.layers().size());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    params[l] = layer.params;
    if (layer.kind != LayerKind::Dense && layer.kind != LayerKind::Conv) continue;
    if (l < plan.layers.size()) {
      if (const auto& cb = plan.layers[l][TensorRole::Weights]) params[l][0] = quantize(params[l][0], cb);
      if (const auto& cb = plan.layers[l][TensorRole::Bias]) params[l][1] = quantize(params[l][1], cb);
    }
  }
  return with_parameters(net, params);
}

QuantizationPlan plan_quantization(const PolyNetwork& net, int bits, const Tensor& calibration,
                                   std::span<const std::size_t> labels, const PlanOptions& options) {
  require(supported_bits(bits), ErrorCode::InvalidArgument, "bits must be 2, 4, 8 or 16");
  const auto total = frame_count(net, calibration);
  const auto n = std::min(options.calibration_frames, total);
  require(n > 0, ErrorCode::InvalidArgument, "calibration frame count must be positive");

  QuantizationPlan plan;
  plan.bits = bits;
  const auto& layers = net.layers();
  plan.layers.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.kind != LayerKind::Dense && layer.kind != LayerKind::Conv) continue;
    plan.layers[l][TensorRole::Weights] = fit(layer.params[0].values(), bits);
    plan.layers[l][TensorRole::Bias] = fit(layer.params[1].values(), bits);
  }

  if (options.quantize_input) {
    std::span<const double> frames(calibration.data.data(), n * net.input_size());
    plan.input = fit(frames, bits);
  }

  // Activation histograms come from the model with quantized parameters and
  // quantized upstream activations, one layer at a time.
  const PolyNetwork qnet = quantize_parameters(net, plan);
  std::vector<Tensor> current;
  current.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    Tensor x = slice_row(calibration, f);
    x.shape = net.input_shape();
    if (plan.input) quantize_in_place(x.data, *plan.input);
    current.push_back(std::move(x));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (auto& x : current) x = layer_forward(qnet.layers()[l], x);
    if (!quantizes_activation(net, l)) continue;
    std::vector<double> samples;
    for (const auto& x : current) samples.insert(samples.end(), x.data.begin(), x.data.end());
    plan.layers[l][TensorRole::Activations] = fit(samples, bits);
    for (auto& x : current) quantize_in_place(x.data, *plan.layers[l][TensorRole::Activations]);
  }

  if (options.include_gradients) fit_gradients(plan, net, calibration, labels, n, options.minibatch_size);
  return plan;
}

void refresh_gradient_codebooks(QuantizationPlan& plan, const PolyNetwork& net, const Tensor& calibration,
                                std::span<const std::size_t> labels, std::size_t frames,
                                std::size_t minibatch_size) {
  require(plan.layers.size() == net.layers().size(), ErrorCode::ShapeMismatch, "plan does not match network");
  fit_gradients(plan, net, calibration, labels, frames, minibatch_size);
}

Tensor quantized_forward(const PolyNetwork& quantized_net, const QuantizationPlan& plan, const Tensor& x) {
  const auto hooks = train::hooks_for(plan, quantized_net.layers().size(), false);
  auto trace = train::forward_trace_quantized(quantized_net, x, &hooks);
  Tensor out = std::move(trace.back());
  out.shape = {out.size()};
  return out;
}

}  // namespace polyscore::quant
