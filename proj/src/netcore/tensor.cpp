#include "netcore/tensor.hpp"

#include <cmath>
#include <sstream>

#include "common/error.hpp"

namespace polyscore {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(numel(shape), 0.0) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  validate();
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::zeros(Shape s) { return Tensor(std::move(s)); }

void Tensor::validate() const {
  for (auto d : shape) require(d > 0, ErrorCode::ShapeMismatch, "zero-sized dimension in " + shape_string(shape));
  require(numel(shape) == data.size(), ErrorCode::ShapeMismatch,
          "data length " + std::to_string(data.size()) + " does not match shape " + shape_string(shape));
  if (fixed_point) {
    const double scale = std::ldexp(1.0, fixed_point->scale_bits);
    const double limit = std::ldexp(1.0, fixed_point->total_bits - 1);
    for (double v : data) {
      const double scaled = v * scale;
      require(scaled == std::nearbyint(scaled), ErrorCode::InvalidArgument, "value is not on the fixed-point grid");
      require(scaled >= -limit && scaled < limit, ErrorCode::Overflow, "fixed-point value exceeds declared width");
    }
  }
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor slice_row(const Tensor& batch, std::size_t index) {
  require(batch.rank() >= 2, ErrorCode::ShapeMismatch, "slice_row needs a batch tensor");
  require(index < batch.shape[0], ErrorCode::InvalidArgument, "row index out of range");
  Shape inner(batch.shape.begin() + 1, batch.shape.end());
  const std::size_t stride = numel(inner);
  std::vector<double> row(batch.data.begin() + static_cast<std::ptrdiff_t>(index * stride),
                          batch.data.begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
  return Tensor(std::move(inner), std::move(row));
}

}  // namespace polyscore
