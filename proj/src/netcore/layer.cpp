#include "netcore/layer.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace polyscore {

namespace {

struct KindName {
  LayerKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::Dense, "Dense"},
    {LayerKind::Conv, "Conv"},
    {LayerKind::BatchNorm, "BatchNorm"},
    {LayerKind::SquareActivation, "SquareActivation"},
    {LayerKind::SigmoidPoly, "SigmoidPoly"},
    {LayerKind::ScaledMeanPool, "ScaledMeanPool"},
    {LayerKind::ReLU, "ReLU"},
    {LayerKind::Sigmoid, "Sigmoid"},
    {LayerKind::MaxPool, "MaxPool"},
    {LayerKind::Softmax, "Softmax"},
};

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  require(t.rank() == rank, ErrorCode::ShapeMismatch,
          std::string(what) + " must have rank " + std::to_string(rank) + ", got " + shape_string(t.shape));
}

Shape pool_output_shape(const Layer& layer, const Shape& in) {
  const auto wh = layer.pool.window_h;
  const auto ww = layer.pool.window_w;
  require(wh > 0 && ww > 0, ErrorCode::Geometry, "pool window must be positive");
  if (in.size() == 1) {
    require(wh == 1, ErrorCode::Geometry, "rank-1 pooling needs window_h == 1");
    require(in[0] % ww == 0, ErrorCode::Geometry, "pool window does not divide input length");
    return {in[0] / ww};
  }
  require(in.size() == 3, ErrorCode::Geometry, "pooling expects rank-1 or [C,H,W] input");
  require(in[1] % wh == 0 && in[2] % ww == 0, ErrorCode::Geometry, "pool window does not divide input plane");
  return {in[0], in[1] / wh, in[2] / ww};
}

}  // namespace

const char* to_string(LayerKind kind) {
  for (const auto& kn : kKindNames)
    if (kn.kind == kind) return kn.name;
  return "Unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (const auto& kn : kKindNames)
    if (name == kn.name) return kn.kind;
  raise(ErrorCode::Unsupported, "unknown layer kind '" + name + "'");
}

bool is_he_kind(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense:
    case LayerKind::Conv:
    case LayerKind::SquareActivation:
    case LayerKind::SigmoidPoly:
    case LayerKind::ScaledMeanPool:
      return true;
    default:
      return false;
  }
}

bool has_parameters(LayerKind kind) {
  return kind == LayerKind::Dense || kind == LayerKind::Conv || kind == LayerKind::BatchNorm;
}

bool is_elementwise(LayerKind kind) {
  return kind == LayerKind::SquareActivation || kind == LayerKind::SigmoidPoly || kind == LayerKind::ReLU ||
         kind == LayerKind::Sigmoid;
}

Layer Layer::dense(Tensor weights, Tensor bias) {
  Layer l;
  l.kind = LayerKind::Dense;
  l.params = {std::move(weights), std::move(bias)};
  l.validate();
  return l;
}

Layer Layer::conv2d(Tensor kernel, Tensor bias, ConvGeometry geometry) {
  Layer l;
  l.kind = LayerKind::Conv;
  l.params = {std::move(kernel), std::move(bias)};
  l.conv = geometry;
  l.validate();
  return l;
}

Layer Layer::batch_norm(Tensor gamma, Tensor beta, Tensor mean, Tensor stddev) {
  Layer l;
  l.kind = LayerKind::BatchNorm;
  l.params = {std::move(gamma), std::move(beta), std::move(mean), std::move(stddev)};
  l.validate();
  return l;
}

Layer Layer::activation(LayerKind kind) {
  require(is_elementwise(kind) || kind == LayerKind::Softmax, ErrorCode::InvalidArgument,
          std::string("not an activation kind: ") + to_string(kind));
  Layer l;
  l.kind = kind;
  return l;
}

Layer Layer::pooling(LayerKind kind, std::size_t window_h, std::size_t window_w) {
  require(kind == LayerKind::MaxPool || kind == LayerKind::ScaledMeanPool, ErrorCode::InvalidArgument,
          "not a pooling kind");
  Layer l;
  l.kind = kind;
  l.pool = {window_h, window_w};
  return l;
}

void Layer::validate() const {
  for (const auto& p : params) {
    p.validate();
    require(p.all_finite(), ErrorCode::NonFinite, std::string(to_string(kind)) + " parameter is NaN/Inf");
  }
  switch (kind) {
    case LayerKind::Dense: {
      require(params.size() == 2, ErrorCode::InvalidArgument, "Dense needs W and b");
      require_rank(params[0], 2, "Dense W");
      require_rank(params[1], 1, "Dense b");
      require(params[1].shape[0] == params[0].shape[0], ErrorCode::ShapeMismatch,
              "Dense bias length must equal output width");
      break;
    }
    case LayerKind::Conv: {
      require(params.size() == 2, ErrorCode::InvalidArgument, "Conv needs kernel and bias");
      require_rank(params[0], 4, "Conv kernel");
      require_rank(params[1], 1, "Conv bias");
      require(params[1].shape[0] == params[0].shape[0], ErrorCode::ShapeMismatch,
              "Conv bias length must equal output channels");
      require(conv.stride == 1 || conv.stride == 2, ErrorCode::Geometry, "Conv stride must be 1 or 2");
      break;
    }
    case LayerKind::BatchNorm: {
      require(params.size() == 4, ErrorCode::InvalidArgument, "BatchNorm needs gamma, beta, mean, stddev");
      for (const auto& p : params) require_rank(p, 1, "BatchNorm parameter");
      const auto width = params[0].size();
      for (const auto& p : params)
        require(p.size() == width, ErrorCode::ShapeMismatch, "BatchNorm parameters differ in length");
      for (double s : params[3].data)
        require(s > 0.0, ErrorCode::InvalidArgument, "BatchNorm stddev must be strictly positive");
      break;
    }
    default:
      require(params.empty(), ErrorCode::InvalidArgument, std::string(to_string(kind)) + " takes no parameters");
  }
}

std::size_t batchnorm_width(const Shape& in) { return in.size() == 3 ? in[0] : numel(in); }

std::size_t batchnorm_channel(const Shape& in, std::size_t element) {
  return in.size() == 3 ? element / (in[1] * in[2]) : element;
}

ConvPlan plan_conv(const Layer& layer, const Shape& in) {
  require(in.size() == 3, ErrorCode::Geometry, "Conv expects [C,H,W] input, got " + shape_string(in));
  const auto& k = layer.params[0].shape;
  require(k[1] == in[0], ErrorCode::Geometry, "Conv kernel input channels do not match input");
  ConvPlan p{};
  p.in_c = in[0];
  p.in_h = in[1];
  p.in_w = in[2];
  p.out_c = k[0];
  p.k_h = k[2];
  p.k_w = k[3];
  p.stride = layer.conv.stride;
  const auto s = static_cast<std::size_t>(p.stride);
  if (layer.conv.padding == Padding::Valid) {
    require(p.in_h >= p.k_h && p.in_w >= p.k_w, ErrorCode::Geometry, "Conv kernel larger than input");
    p.out_h = (p.in_h - p.k_h) / s + 1;
    p.out_w = (p.in_w - p.k_w) / s + 1;
    p.pad_top = p.pad_left = 0;
  } else {
    p.out_h = (p.in_h + s - 1) / s;
    p.out_w = (p.in_w + s - 1) / s;
    const auto need_h = (p.out_h - 1) * s + p.k_h;
    const auto need_w = (p.out_w - 1) * s + p.k_w;
    p.pad_top = need_h > p.in_h ? (need_h - p.in_h) / 2 : 0;
    p.pad_left = need_w > p.in_w ? (need_w - p.in_w) / 2 : 0;
  }
  return p;
}

Shape Layer::output_shape(const Shape& in) const {
  switch (kind) {
    case LayerKind::Dense:
      require(numel(in) == params[0].shape[1], ErrorCode::ShapeMismatch,
              "Dense expects " + std::to_string(params[0].shape[1]) + " inputs, got " + shape_string(in));
      return {params[0].shape[0]};
    case LayerKind::Conv: {
      const auto p = plan_conv(*this, in);
      return {p.out_c, p.out_h, p.out_w};
    }
    case LayerKind::BatchNorm:
      require(batchnorm_width(in) == params[0].size(), ErrorCode::ShapeMismatch,
              "BatchNorm width does not match input " + shape_string(in));
      return in;
    case LayerKind::MaxPool:
    case LayerKind::ScaledMeanPool:
      return pool_output_shape(*this, in);
    case LayerKind::Softmax:
      require(in.size() == 1, ErrorCode::ShapeMismatch, "Softmax expects a vector");
      return in;
    default:
      return in;
  }
}

// The odd part is rounded as one term so that p(z) + p(-z) == 1 holds in doubles too.
double sigmoid_poly(double z) { return 0.5 + (z / 4.0 - z * z * z / 48.0); }

double sigmoid_poly_derivative(double z) { return 0.25 - z * z / 16.0; }

namespace {

Tensor dense_forward(const Layer& layer, const Tensor& x) {
  const auto& w = layer.params[0];
  const auto& b = layer.params[1];
  const auto out = w.shape[0];
  const auto in = w.shape[1];
  Tensor y({out});
  for (std::size_t j = 0; j < out; ++j) {
    double acc = b[j];
    const double* row = w.data.data() + j * in;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[j] = acc;
  }
  return y;
}

Tensor conv_forward(const Layer& layer, const Tensor& x) {
  const auto p = plan_conv(layer, x.shape);
  const auto& k = layer.params[0];
  const auto& b = layer.params[1];
  Tensor y({p.out_c, p.out_h, p.out_w});
  const auto s = static_cast<std::size_t>(p.stride);
  for (std::size_t o = 0; o < p.out_c; ++o)
    for (std::size_t oy = 0; oy < p.out_h; ++oy)
      for (std::size_t ox = 0; ox < p.out_w; ++ox) {
        double acc = b[o];
        for (std::size_t c = 0; c < p.in_c; ++c)
          for (std::size_t ky = 0; ky < p.k_h; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(p.pad_top);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(p.in_h)) continue;  // zero padding
            for (std::size_t kx = 0; kx < p.k_w; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(p.pad_left);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(p.in_w)) continue;
              acc += k[((o * p.in_c + c) * p.k_h + ky) * p.k_w + kx] *
                     x[(c * p.in_h + static_cast<std::size_t>(iy)) * p.in_w + static_cast<std::size_t>(ix)];
            }
          }
        y[(o * p.out_h + oy) * p.out_w + ox] = acc;
      }
  return y;
}

Tensor pool_forward(const Layer& layer, const Tensor& x) {
  const Shape out_shape = layer.output_shape(x.shape);
  Tensor y(out_shape);
  const bool is_max = layer.kind == LayerKind::MaxPool;
  const std::size_t channels = x.rank() == 3 ? x.shape[0] : 1;
  const std::size_t in_h = x.rank() == 3 ? x.shape[1] : 1;
  const std::size_t in_w = x.rank() == 3 ? x.shape[2] : x.shape[0];
  const std::size_t out_h = in_h / layer.pool.window_h;
  const std::size_t out_w = in_w / layer.pool.window_w;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double acc = is_max ? -INFINITY : 0.0;
        for (std::size_t wy = 0; wy < layer.pool.window_h; ++wy)
          for (std::size_t wx = 0; wx < layer.pool.window_w; ++wx) {
            const double v = x[(c * in_h + oy * layer.pool.window_h + wy) * in_w + ox * layer.pool.window_w + wx];
            acc = is_max ? std::max(acc, v) : acc + v;
          }
        y[(c * out_h + oy) * out_w + ox] = acc;
      }
  return y;
}

}  // namespace

Tensor layer_forward(const Layer& layer, const Tensor& x) {
  switch (layer.kind) {
    case LayerKind::Dense:
      layer.output_shape(x.shape);
      return dense_forward(layer, x);
    case LayerKind::Conv:
      return conv_forward(layer, x);
    case LayerKind::BatchNorm: {
      layer.output_shape(x.shape);
      Tensor y(x.shape);
      const auto& g = layer.params[0];
      const auto& be = layer.params[1];
      const auto& mu = layer.params[2];
      const auto& sd = layer.params[3];
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto c = batchnorm_channel(x.shape, i);
        y[i] = g[c] * (x[i] - mu[c]) / sd[c] + be[c];
      }
      return y;
    }
    case LayerKind::SquareActivation: {
      Tensor y(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i];
      return y;
    }
    case LayerKind::SigmoidPoly: {
      Tensor y(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_poly(x[i]);
      return y;
    }
    case LayerKind::ReLU: {
      Tensor y(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      return y;
    }
    case LayerKind::Sigmoid: {
      Tensor y(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
      return y;
    }
    case LayerKind::MaxPool:
    case LayerKind::ScaledMeanPool:
      return pool_forward(layer, x);
    case LayerKind::Softmax: {
      layer.output_shape(x.shape);
      Tensor y(x.shape);
      const double m = *std::max_element(x.data.begin(), x.data.end());
      double z = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) z += (y[i] = std::exp(x[i] - m));
      for (auto& v : y.data) v /= z;
      return y;
    }
  }
  raise(ErrorCode::Unsupported, "layer kind");
}

}  // namespace polyscore
