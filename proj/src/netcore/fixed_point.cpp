#include "netcore/fixed_point.hpp"

#include <cmath>

#include "common/error.hpp"
#include "common/modmath.hpp"

namespace polyscore {

namespace {

std::int64_t to_grid(double v, int bits) {
  const double scaled = std::nearbyint(std::ldexp(v, bits));
  require(std::fabs(scaled) < 9.0e18, ErrorCode::Overflow, "weight does not fit a 64-bit fixed-point word");
  return static_cast<std::int64_t>(scaled);
}

FixedPointOp lower_dense(const Layer& layer, std::size_t in_size, int in_scale, int wbits) {
  const auto& w = layer.params[0];
  const auto& b = layer.params[1];
  FixedPointOp op;
  op.kind = FixedOpKind::Linear;
  op.in_size = in_size;
  op.out_size = w.shape[0];
  op.in_scale_bits = in_scale;
  op.out_scale_bits = in_scale + wbits;
  op.rows.resize(op.out_size);
  for (std::size_t j = 0; j < op.out_size; ++j) {
    for (std::size_t i = 0; i < in_size; ++i) {
      const auto q = to_grid(w[j * in_size + i], wbits);
      if (q != 0) op.rows[j].terms.emplace_back(static_cast<std::uint32_t>(i), q);
    }
    op.rows[j].bias = b[j];
  }
  return op;
}

FixedPointOp lower_conv(const Layer& layer, const Shape& in, int in_scale, int wbits) {
  const auto p = plan_conv(layer, in);
  const auto& k = layer.params[0];
  const auto& b = layer.params[1];
  FixedPointOp op;
  op.kind = FixedOpKind::Linear;
  op.in_size = numel(in);
  op.out_size = p.out_c * p.out_h * p.out_w;
  op.in_scale_bits = in_scale;
  op.out_scale_bits = in_scale + wbits;
  op.rows.resize(op.out_size);
  const auto s = static_cast<std::size_t>(p.stride);
  for (std::size_t o = 0; o < p.out_c; ++o)
    for (std::size_t oy = 0; oy < p.out_h; ++oy)
      for (std::size_t ox = 0; ox < p.out_w; ++ox) {
        auto& row = op.rows[(o * p.out_h + oy) * p.out_w + ox];
        row.bias = b[o];
        for (std::size_t c = 0; c < p.in_c; ++c)
          for (std::size_t ky = 0; ky < p.k_h; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(p.pad_top);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(p.in_h)) continue;
            for (std::size_t kx = 0; kx < p.k_w; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(p.pad_left);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(p.in_w)) continue;
              const auto q = to_grid(k[((o * p.in_c + c) * p.k_h + ky) * p.k_w + kx], wbits);
              if (q == 0) continue;
              const auto idx = (c * p.in_h + static_cast<std::size_t>(iy)) * p.in_w + static_cast<std::size_t>(ix);
              row.terms.emplace_back(static_cast<std::uint32_t>(idx), q);
            }
          }
      }
  return op;
}

FixedPointOp lower_pool(const Layer& layer, const Shape& in, int in_scale) {
  FixedPointOp op;
  op.kind = FixedOpKind::Linear;
  op.in_size = numel(in);
  op.in_scale_bits = op.out_scale_bits = in_scale;
  const std::size_t channels = in.size() == 3 ? in[0] : 1;
  const std::size_t in_h = in.size() == 3 ? in[1] : 1;
  const std::size_t in_w = in.size() == 3 ? in[2] : in[0];
  const std::size_t out_h = in_h / layer.pool.window_h;
  const std::size_t out_w = in_w / layer.pool.window_w;
  op.out_size = channels * out_h * out_w;
  op.rows.resize(op.out_size);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        auto& row = op.rows[(c * out_h + oy) * out_w + ox];
        for (std::size_t wy = 0; wy < layer.pool.window_h; ++wy)
          for (std::size_t wx = 0; wx < layer.pool.window_w; ++wx) {
            const auto idx = (c * in_h + oy * layer.pool.window_h + wy) * in_w + ox * layer.pool.window_w + wx;
            row.terms.emplace_back(static_cast<std::uint32_t>(idx), 1);
          }
      }
  return op;
}

}  // namespace

FixedPointNetwork compile_fixed_point(const PolyNetwork& net, int input_scale_bits, int weight_scale_bits) {
  require(net.he_compatible(), ErrorCode::Unsupported, "fixed-point lowering needs an HE-compatible network");
  require(input_scale_bits >= 0 && input_scale_bits <= 24 && weight_scale_bits >= 0 && weight_scale_bits <= 24,
          ErrorCode::InvalidArgument, "scale bits must lie in [0, 24]");
  FixedPointNetwork out;
  out.input_scale_bits = input_scale_bits;
  out.weight_scale_bits = weight_scale_bits;
  out.input_size = net.input_size();
  int scale = input_scale_bits;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const auto& layer = net.layers()[li];
    const Shape& in = net.shape_at(li);
    const auto in_size = numel(in);
    FixedPointOp op;
    switch (layer.kind) {
      case LayerKind::Dense:
        op = lower_dense(layer, in_size, scale, weight_scale_bits);
        break;
      case LayerKind::Conv:
        op = lower_conv(layer, in, scale, weight_scale_bits);
        break;
      case LayerKind::ScaledMeanPool:
        op = lower_pool(layer, in, scale);
        break;
      case LayerKind::SquareActivation:
        op.kind = FixedOpKind::Square;
        op.in_size = op.out_size = in_size;
        op.in_scale_bits = scale;
        op.out_scale_bits = 2 * scale;
        break;
      case LayerKind::SigmoidPoly: {
        op.kind = FixedOpKind::SigmoidPoly;
        op.in_size = op.out_size = in_size;
        op.in_scale_bits = scale;
        op.coeff_bits = std::max(weight_scale_bits, 2);  // 1/4 must be exact
        op.out_scale_bits = 3 * scale + op.coeff_bits;
        op.cubic_coeff = static_cast<std::int64_t>(std::nearbyint(-std::ldexp(1.0, op.coeff_bits) / 48.0));
        break;
      }
      default:
        raise(ErrorCode::Unsupported, std::string("cannot lower ") + to_string(layer.kind));
    }
    scale = op.out_scale_bits;
    out.ops.push_back(std::move(op));
  }
  out.output_size = net.output_dim();
  out.output_scale_bits = scale;
  return out;
}

std::vector<std::int64_t> encode_input(const FixedPointNetwork& net, std::span<const double> x) {
  require(x.size() == net.input_size, ErrorCode::ShapeMismatch, "input frame has wrong dimension");
  std::vector<std::int64_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = to_grid(x[i], net.input_scale_bits);
  return out;
}

std::uint64_t bias_residue(double bias, int scale_bits, std::uint64_t t) {
  return real_integer_residue(std::nearbyint(std::ldexp(bias, scale_bits)), t);
}

std::vector<std::uint64_t> fixed_point_forward(const FixedPointNetwork& net, std::span<const std::int64_t> x,
                                               std::uint64_t t) {
  require(x.size() == net.input_size, ErrorCode::ShapeMismatch, "input frame has wrong dimension");
  std::vector<std::uint64_t> h(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) h[i] = to_residue(x[i], t);
  for (const auto& op : net.ops) {
    std::vector<std::uint64_t> next(op.out_size);
    switch (op.kind) {
      case FixedOpKind::Linear:
        for (std::size_t j = 0; j < op.out_size; ++j) {
          std::uint64_t acc = bias_residue(op.rows[j].bias, op.out_scale_bits, t);
          for (const auto& [idx, w] : op.rows[j].terms) acc = mod_add(acc, mod_mul(h[idx], to_residue(w, t), t), t);
          next[j] = acc;
        }
        break;
      case FixedOpKind::Square:
        for (std::size_t j = 0; j < op.out_size; ++j) next[j] = mod_mul(h[j], h[j], t);
        break;
      case FixedOpKind::SigmoidPoly: {
        const int s = op.in_scale_bits;
        const std::uint64_t c0 = mod_pow(2, static_cast<std::uint64_t>(3 * s + op.coeff_bits - 1), t);
        const std::uint64_t c1 = mod_pow(2, static_cast<std::uint64_t>(2 * s + op.coeff_bits - 2), t);
        const std::uint64_t c3 = to_residue(op.cubic_coeff, t);
        for (std::size_t j = 0; j < op.out_size; ++j) {
          const std::uint64_t z = h[j];
          const std::uint64_t z3 = mod_mul(mod_mul(z, z, t), z, t);
          next[j] = mod_add(mod_add(mod_mul(c3, z3, t), mod_mul(z, c1, t), t), c0, t);
        }
        break;
      }
    }
    h = std::move(next);
  }
  return h;
}

std::vector<double> decode_outputs(const FixedPointNetwork& net, std::span<const std::uint64_t> outputs,
                                   std::uint64_t t) {
  std::vector<double> out(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i)
    out[i] = std::ldexp(static_cast<double>(centered(outputs[i], t)), -net.output_scale_bits);
  return out;
}

PolyNetwork snap_to_fixed_point(const PolyNetwork& net, int weight_scale_bits) {
  std::vector<Layer> layers = net.layers();
  for (auto& layer : layers) {
    if (layer.kind != LayerKind::Dense && layer.kind != LayerKind::Conv) continue;
    for (auto& v : layer.params[0].data) v = std::ldexp(std::nearbyint(std::ldexp(v, weight_scale_bits)), -weight_scale_bits);
  }
  return PolyNetwork(net.input_shape(), std::move(layers));
}

}  // namespace polyscore
