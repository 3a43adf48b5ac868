#include <cmath>

#include "common/error.hpp"
#include "netcore/network.hpp"

namespace polyscore {

namespace {

struct Affine {
  std::vector<double> scale;  // gamma / stddev
  std::vector<double> shift;  // beta - mean * gamma / stddev
};

Affine batchnorm_affine(const Layer& bn) {
  const auto& g = bn.params[0];
  const auto& b = bn.params[1];
  const auto& mu = bn.params[2];
  const auto& sd = bn.params[3];
  Affine a;
  a.scale.resize(g.size());
  a.shift.resize(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    require(sd[c] > 0.0, ErrorCode::InvalidArgument, "BatchNorm stddev has a zero entry");
    a.scale[c] = g[c] / sd[c];
    a.shift[c] = b[c] - mu[c] * a.scale[c];
  }
  return a;
}

bool is_foldable(LayerKind k) { return k == LayerKind::Dense || k == LayerKind::Conv; }

// Next layer consumes BN(x): W' = W diag(scale), b' = b + W shift.
bool fold_into_next(const Affine& a, const Shape& bn_in, Layer& next) {
  if (next.kind == LayerKind::Dense) {
    auto& w = next.params[0];
    auto& b = next.params[1];
    const auto out = w.shape[0];
    const auto in = w.shape[1];
    for (std::size_t j = 0; j < out; ++j)
      for (std::size_t i = 0; i < in; ++i) {
        const auto c = batchnorm_channel(bn_in, i);
        const double wji = w[j * in + i];
        b[j] += wji * a.shift[c];
        w[j * in + i] = wji * a.scale[c];
      }
    return true;
  }
  // Conv: zero padding of BN(x) differs from padding of x unless the shift vanishes.
  if (bn_in.size() != 3) return false;
  if (next.conv.padding == Padding::Same) {
    for (double s : a.shift)
      if (s != 0.0) return false;
  }
  auto& k = next.params[0];
  auto& b = next.params[1];
  const auto oc = k.shape[0], ic = k.shape[1], kh = k.shape[2], kw = k.shape[3];
  for (std::size_t o = 0; o < oc; ++o)
    for (std::size_t c = 0; c < ic; ++c)
      for (std::size_t t = 0; t < kh * kw; ++t) {
        auto& v = k[(o * ic + c) * kh * kw + t];
        b[o] += v * a.shift[c];
        v *= a.scale[c];
      }
  return true;
}

// Previous layer produced x: rows scale, bias becomes gamma (b - mu)/sigma + beta.
void fold_into_previous(const Affine& a, Layer& prev) {
  auto& w = prev.params[0];
  auto& b = prev.params[1];
  const auto rows = w.shape[0];
  require(rows == a.scale.size(), ErrorCode::ShapeMismatch, "BatchNorm width does not match preceding layer");
  const auto row_len = w.size() / rows;
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t i = 0; i < row_len; ++i) w[j * row_len + i] *= a.scale[j];
    b[j] = a.scale[j] * b[j] + a.shift[j];
  }
}

}  // namespace

PolyNetwork fold_batchnorm(const PolyNetwork& net) {
  const auto& layers = net.layers();
  std::vector<Layer> out;
  out.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.kind != LayerKind::BatchNorm) {
      out.push_back(layer);
      continue;
    }
    const Affine a = batchnorm_affine(layer);
    if (i + 1 < layers.size() && is_foldable(layers[i + 1].kind)) {
      Layer next = layers[i + 1];
      if (fold_into_next(a, net.shape_at(i), next)) {
        out.push_back(std::move(next));
        ++i;
        continue;
      }
    }
    require(!out.empty() && is_foldable(out.back().kind), ErrorCode::Unsupported,
            "BatchNorm at position " + std::to_string(i) + " has no adjacent Dense/Conv layer to fold into");
    fold_into_previous(a, out.back());
  }
  return PolyNetwork(net.input_shape(), std::move(out));
}

PolyNetwork convert_to_dpn(const PolyNetwork& net) {
  const PolyNetwork folded = fold_batchnorm(net);
  std::vector<Layer> out;
  out.reserve(folded.layers().size());
  for (const auto& layer : folded.layers()) {
    switch (layer.kind) {
      case LayerKind::ReLU:
        out.push_back(Layer::activation(LayerKind::SquareActivation));
        break;
      case LayerKind::Sigmoid:
        out.push_back(Layer::activation(LayerKind::SigmoidPoly));
        break;
      case LayerKind::MaxPool:
        out.push_back(Layer::pooling(LayerKind::ScaledMeanPool, layer.pool.window_h, layer.pool.window_w));
        break;
      case LayerKind::Softmax:
        break;  // monotone; applied client-side when probabilities are wanted
      case LayerKind::Dense:
      case LayerKind::Conv:
      case LayerKind::SquareActivation:
      case LayerKind::SigmoidPoly:
      case LayerKind::ScaledMeanPool:
        out.push_back(layer);
        break;
      default:
        raise(ErrorCode::Unsupported, std::string("cannot convert layer kind ") + to_string(layer.kind));
    }
  }
  return PolyNetwork(folded.input_shape(), std::move(out));
}

}  // namespace polyscore
