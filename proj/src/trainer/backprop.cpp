#include "trainer/backprop.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "quantizer/plan.hpp"

namespace polyscore::train {

namespace {

void apply(Tensor& t, const quant::Codebook* cb) {
  if (cb != nullptr) quant::quantize_in_place(t.data, *cb);
}

const quant::Codebook* hook_at(const std::vector<const quant::Codebook*>& v, std::size_t i) {
  return i < v.size() ? v[i] : nullptr;
}

std::vector<Tensor> zero_like(const std::vector<Tensor>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Tensor::zeros(p.shape));
  return out;
}

Tensor conv_backward(const Layer& layer, const Tensor& x, const Tensor& dy, std::vector<Tensor>* pg) {
  const auto p = plan_conv(layer, x.shape);
  const auto& k = layer.params[0];
  Tensor dx = Tensor::zeros(x.shape);
  const auto s = static_cast<std::size_t>(p.stride);
  for (std::size_t o = 0; o < p.out_c; ++o)
    for (std::size_t oy = 0; oy < p.out_h; ++oy)
      for (std::size_t ox = 0; ox < p.out_w; ++ox) {
        const double g = dy[(o * p.out_h + oy) * p.out_w + ox];
        if (pg) (*pg)[1][o] += g;
        for (std::size_t c = 0; c < p.in_c; ++c)
          for (std::size_t ky = 0; ky < p.k_h; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(p.pad_top);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(p.in_h)) continue;
            for (std::size_t kx = 0; kx < p.k_w; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(p.pad_left);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(p.in_w)) continue;
              const auto ki = ((o * p.in_c + c) * p.k_h + ky) * p.k_w + kx;
              const auto xi = (c * p.in_h + static_cast<std::size_t>(iy)) * p.in_w + static_cast<std::size_t>(ix);
              dx[xi] += k[ki] * g;
              if (pg) (*pg)[0][ki] += x[xi] * g;
            }
          }
      }
  return dx;
}

Tensor pool_backward(const Layer& layer, const Tensor& x, const Tensor& dy) {
  Tensor dx = Tensor::zeros(x.shape);
  const bool is_max = layer.kind == LayerKind::MaxPool;
  const std::size_t channels = x.rank() == 3 ? x.shape[0] : 1;
  const std::size_t in_h = x.rank() == 3 ? x.shape[1] : 1;
  const std::size_t in_w = x.rank() == 3 ? x.shape[2] : x.shape[0];
  const std::size_t wh = layer.pool.window_h, ww = layer.pool.window_w;
  const std::size_t out_h = in_h / wh, out_w = in_w / ww;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double g = dy[(c * out_h + oy) * out_w + ox];
        std::size_t best = 0;
        double best_v = -INFINITY;
        for (std::size_t wy = 0; wy < wh; ++wy)
          for (std::size_t wx = 0; wx < ww; ++wx) {
            const auto xi = (c * in_h + oy * wh + wy) * in_w + ox * ww + wx;
            if (!is_max) {
              dx[xi] += g;
            } else if (x[xi] > best_v) {
              best_v = x[xi];
              best = xi;
            }
          }
        if (is_max) dx[best] += g;
      }
  return dx;
}

}  // namespace

Tensor layer_backward(const Layer& layer, const Tensor& x, const Tensor& y, const Tensor& dy,
                      std::vector<Tensor>* pg) {
  require(dy.size() == y.size(), ErrorCode::ShapeMismatch, "upstream gradient size mismatch");
  switch (layer.kind) {
    case LayerKind::Dense: {
      const auto& w = layer.params[0];
      const auto out = w.shape[0], in = w.shape[1];
      Tensor dx = Tensor::zeros(x.shape);
      for (std::size_t j = 0; j < out; ++j) {
        const double g = dy[j];
        const double* row = w.data.data() + j * in;
        for (std::size_t i = 0; i < in; ++i) dx[i] += row[i] * g;
        if (pg) {
          double* grow = (*pg)[0].data.data() + j * in;
          for (std::size_t i = 0; i < in; ++i) grow[i] += x[i] * g;
          (*pg)[1][j] += g;
        }
      }
      return dx;
    }
    case LayerKind::Conv:
      return conv_backward(layer, x, dy, pg);
    case LayerKind::BatchNorm: {
      const auto& g = layer.params[0];
      const auto& mu = layer.params[2];
      const auto& sd = layer.params[3];
      Tensor dx(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto c = batchnorm_channel(x.shape, i);
        const double xhat = (x[i] - mu[c]) / sd[c];
        dx[i] = dy[i] * g[c] / sd[c];
        if (pg) {
          (*pg)[0][c] += dy[i] * xhat;
          (*pg)[1][c] += dy[i];
          (*pg)[2][c] -= dy[i] * g[c] / sd[c];
          (*pg)[3][c] -= dy[i] * g[c] * xhat / sd[c];
        }
      }
      return dx;
    }
    case LayerKind::SquareActivation: {
      Tensor dx(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = 2.0 * x[i] * dy[i];
      return dx;
    }
    case LayerKind::SigmoidPoly: {
      Tensor dx(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = sigmoid_poly_derivative(x[i]) * dy[i];
      return dx;
    }
    case LayerKind::ReLU: {
      Tensor dx(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
      return dx;
    }
    case LayerKind::Sigmoid: {
      Tensor dx(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = y[i] * (1.0 - y[i]) * dy[i];
      return dx;
    }
    case LayerKind::MaxPool:
    case LayerKind::ScaledMeanPool:
      return pool_backward(layer, x, dy);
    case LayerKind::Softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
      Tensor dx(x.shape);
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
      return dx;
    }
  }
  raise(ErrorCode::Unsupported, "layer kind");
}

QuantHooks hooks_for(const quant::QuantizationPlan& plan, std::size_t layers, bool gradients) {
  using quant::TensorRole;
  QuantHooks h;
  h.input = plan.input.get();
  h.activations.resize(layers, nullptr);
  if (gradients) {
    h.activation_grads.resize(layers, nullptr);
  }
  for (std::size_t l = 0; l < layers && l < plan.layers.size(); ++l) {
    h.activations[l] = plan.get(l, TensorRole::Activations);
    if (gradients) {
      h.activation_grads[l] = plan.get(l, TensorRole::ActivationGradients);
    }
  }
  return h;
}

double cross_entropy(std::span<const double> scores, std::size_t label, bool probabilities) {
  require(label < scores.size(), ErrorCode::InvalidArgument, "label out of range");
  if (probabilities) return -std::log(scores[label]);
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  return std::log(z) + m - scores[label];
}

std::vector<Tensor> forward_trace_quantized(const PolyNetwork& net, const Tensor& x, const QuantHooks* hooks) {
  require(x.shape == net.input_shape() || (x.rank() == 1 && x.size() == net.input_size()), ErrorCode::ShapeMismatch,
          "input shape " + shape_string(x.shape) + " does not match network input " +
              shape_string(net.input_shape()));
  std::vector<Tensor> acts;
  acts.reserve(net.layers().size() + 1);
  Tensor in = x;
  in.shape = net.input_shape();
  if (hooks) apply(in, hooks->input);
  acts.push_back(std::move(in));
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    Tensor y = layer_forward(net.layers()[l], acts.back());
    if (hooks) apply(y, hook_at(hooks->activations, l));
    acts.push_back(std::move(y));
  }
  return acts;
}

BackwardResult backward_detailed(const PolyNetwork& net, const Tensor& x, std::size_t label,
                                 const QuantHooks* hooks) {
  const auto& layers = net.layers();
  require(!layers.empty(), ErrorCode::InvalidArgument, "empty network");
  require(label < net.output_dim(), ErrorCode::InvalidArgument, "label out of range");
  BackwardResult r;
  r.activations = forward_trace_quantized(net, x, hooks);
  const auto& out = r.activations.back();
  const bool ends_softmax = layers.back().kind == LayerKind::Softmax;
  r.loss = cross_entropy(out.values(), label, ends_softmax);
  r.predicted = argmax(out.values());

  Tensor dy(out.shape);
  if (ends_softmax) {
    for (std::size_t i = 0; i < out.size(); ++i) dy[i] = i == label ? -1.0 / out[i] : 0.0;
  } else {
    const double m = *std::max_element(out.data.begin(), out.data.end());
    double z = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) z += (dy[i] = std::exp(out[i] - m));
    for (std::size_t i = 0; i < out.size(); ++i) dy[i] = dy[i] / z - (i == label ? 1.0 : 0.0);
  }

  r.grads.resize(layers.size());
  r.output_grads.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    r.output_grads[l] = dy;
    if (hooks) apply(dy, hook_at(hooks->activation_grads, l));
    std::vector<Tensor>* pg = nullptr;
    if (!layer.params.empty()) {
      r.grads[l] = zero_like(layer.params);
      pg = &r.grads[l];
    }
    dy = layer_backward(layer, r.activations[l], r.activations[l + 1], dy, pg);
  }
  return r;
}

ParamGrads backward(const PolyNetwork& net, const Tensor& x, std::size_t label) {
  return backward_detailed(net, x, label).grads;
}

}  // namespace polyscore::train
