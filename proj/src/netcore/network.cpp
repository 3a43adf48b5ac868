#include "netcore/network.hpp"

#include "common/error.hpp"

namespace polyscore {

PolyNetwork::PolyNetwork(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  require(!input_shape_.empty(), ErrorCode::ShapeMismatch, "network input shape is empty");
  for (auto d : input_shape_) require(d > 0, ErrorCode::ShapeMismatch, "zero-sized input dimension");
  shapes_.reserve(layers_.size() + 1);
  shapes_.push_back(input_shape_);
  he_compatible_ = true;
  for (const auto& layer : layers_) {
    layer.validate();
    shapes_.push_back(layer.output_shape(shapes_.back()));
    he_compatible_ = he_compatible_ && is_he_kind(layer.kind);
  }
  output_dim_ = numel(shapes_.back());
}

Tensor forward(const PolyNetwork& net, const Tensor& x) {
  require(x.shape == net.input_shape(), ErrorCode::ShapeMismatch,
          "input " + shape_string(x.shape) + " does not match network input " + shape_string(net.input_shape()));
  Tensor h = x;
  h.codebook.reset();
  h.fixed_point.reset();
  for (const auto& layer : net.layers()) h = layer_forward(layer, h);
  h.shape = {h.size()};
  return h;
}

std::vector<Tensor> forward_trace(const PolyNetwork& net, const Tensor& x) {
  require(x.shape == net.input_shape(), ErrorCode::ShapeMismatch, "input shape does not match network");
  std::vector<Tensor> trace;
  trace.reserve(net.layers().size() + 1);
  trace.push_back(x);
  for (const auto& layer : net.layers()) trace.push_back(layer_forward(layer, trace.back()));
  return trace;
}

MultiplicativeDepth multiplicative_depth(const PolyNetwork& net) {
  require(net.he_compatible(), ErrorCode::Unsupported, "multiplicative depth needs an HE-compatible network");
  MultiplicativeDepth d;
  for (const auto& layer : net.layers()) {
    if (layer.kind == LayerKind::SquareActivation) d.depth += 1;
    if (layer.kind == LayerKind::SigmoidPoly) d.depth += 2;  // z*z, then (z*z)*z
  }
  return d;
}

PolyNetwork with_parameters(const PolyNetwork& net, const std::vector<std::vector<Tensor>>& params) {
  require(params.size() == net.layers().size(), ErrorCode::InvalidArgument, "parameter list length mismatch");
  std::vector<Layer> layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!has_parameters(layers[i].kind)) continue;
    require(params[i].size() == layers[i].params.size(), ErrorCode::InvalidArgument, "parameter count mismatch");
    for (std::size_t p = 0; p < params[i].size(); ++p) {
      require(params[i][p].shape == layers[i].params[p].shape, ErrorCode::ShapeMismatch, "parameter shape mismatch");
      layers[i].params[p] = params[i][p];
    }
  }
  return PolyNetwork(net.input_shape(), std::move(layers));
}

std::size_t argmax(std::span<const double> scores) {
  require(!scores.empty(), ErrorCode::InvalidArgument, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

}  // namespace polyscore
