#include "hecrypt/circuit.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace polyscore::he {

namespace {

struct SigmoidPlain {
  std::uint64_t c0, c1, c3;
  int c1_scale, c3_scale;
};

SigmoidPlain sigmoid_plain(const FixedPointOp& op, std::uint64_t t) {
  // 1/2 + z/4 - z^3/48 at output scale 3s + cb
  const int s = op.in_scale_bits;
  SigmoidPlain p;
  p.c0 = mod_pow(2, static_cast<std::uint64_t>(3 * s + op.coeff_bits - 1), t);
  p.c1 = mod_pow(2, static_cast<std::uint64_t>(2 * s + op.coeff_bits - 2), t);
  p.c3 = to_residue(op.cubic_coeff, t);
  p.c1_scale = 2 * s + op.coeff_bits;
  p.c3_scale = op.coeff_bits;
  return p;
}

}  // namespace

std::vector<Ciphertext> encrypted_forward(const Evaluator& ev, const FixedPointNetwork& net,
                                          const std::vector<Ciphertext>& inputs) {
  require(inputs.size() == net.input_size, ErrorCode::ShapeMismatch, "encrypted frame has the wrong dimension");
  const std::uint64_t t = ev.params().t;
  std::vector<Ciphertext> h = inputs;
  for (const auto& op : net.ops) {
    std::vector<Ciphertext> next;
    next.reserve(op.out_size);
    switch (op.kind) {
      case FixedOpKind::Linear: {
        const int plain_scale = op.out_scale_bits - op.in_scale_bits;
        std::vector<const Ciphertext*> xs;
        std::vector<std::uint64_t> ws;
        for (const auto& row : op.rows) {
          xs.clear();
          ws.clear();
          for (const auto& [idx, w] : row.terms) {
            xs.push_back(&h[idx]);
            ws.push_back(to_residue(w, t));
          }
          if (xs.empty()) {
            // constant output: zero times any input plus the bias
            xs.push_back(&h[0]);
            ws.push_back(0);
          }
          next.push_back(ev.dot_plain(xs, ws, bias_residue(row.bias, op.out_scale_bits, t), plain_scale));
        }
        break;
      }
      case FixedOpKind::Square:
        for (const auto& x : h) next.push_back(ev.square(x));
        break;
      case FixedOpKind::SigmoidPoly: {
        const auto p = sigmoid_plain(op, t);
        for (const auto& z : h) {
          const Ciphertext z2 = ev.square(z);
          const Ciphertext z3 = ev.relinearize(ev.mul(z2, z));
          Ciphertext out = ev.add(ev.mul_plain(z3, p.c3, p.c3_scale), ev.mul_plain(z, p.c1, p.c1_scale));
          next.push_back(ev.add_plain(out, p.c0));
        }
        break;
      }
    }
    h = std::move(next);
  }
  return h;
}

double static_output_budget(const FixedPointNetwork& net, const NoiseModel& model, std::uint64_t t) {
  auto clamp = [](double b) { return std::max(0.0, b); };
  std::vector<double> b(net.input_size, model.fresh_budget);
  for (const auto& op : net.ops) {
    std::vector<double> next;
    next.reserve(op.out_size);
    switch (op.kind) {
      case FixedOpKind::Linear:
        for (const auto& row : op.rows) {
          double worst = row.terms.empty() ? b.front() : INFINITY;
          double l1 = 0.0;
          for (const auto& [idx, w] : row.terms) {
            worst = std::min(worst, b[idx]);
            l1 += std::fabs(static_cast<double>(centered(to_residue(w, t), t)));
          }
          double out = clamp(NoiseModel::mul_plain(worst, l1));
          if (bias_residue(row.bias, op.out_scale_bits, t) != 0) out = clamp(model.add_plain(out));
          next.push_back(out);
        }
        break;
      case FixedOpKind::Square:
        for (double v : b) next.push_back(clamp(model.relinearize(clamp(model.mul(v, v)))));
        break;
      case FixedOpKind::SigmoidPoly:
        for (double v : b) {
          const double z2 = clamp(model.relinearize(clamp(model.mul(v, v))));
          const double z3 = clamp(model.relinearize(clamp(model.mul(z2, v))));
          const auto p = sigmoid_plain(op, t);
          const double c3 = std::fabs(static_cast<double>(centered(p.c3, t)));
          const double c1 = std::fabs(static_cast<double>(centered(p.c1, t)));
          const double sum = clamp(NoiseModel::add(clamp(NoiseModel::mul_plain(z3, c3)), clamp(NoiseModel::mul_plain(v, c1))));
          next.push_back(clamp(model.add_plain(sum)));
        }
        break;
    }
    b = std::move(next);
  }
  return b.empty() ? model.fresh_budget : *std::min_element(b.begin(), b.end());
}

}  // namespace polyscore::he
