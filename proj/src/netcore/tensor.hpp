#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polyscore {

namespace quant {
struct Codebook;
}

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Fixed-point tag: values represent integer / 2^scale_bits, with the integer
/// inside a signed `total_bits` word.
struct FixedPointTag {
  int scale_bits = 0;
  int total_bits = 32;
};

/// Row-major real array with an explicit shape. Optionally tagged as
/// fixed-point, or as quantized against a codebook.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  std::optional<FixedPointTag> fixed_point;
  std::shared_ptr<const quant::Codebook> codebook;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<double> values);

  static Tensor vector(std::vector<double> values);
  static Tensor zeros(Shape s);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  std::span<const double> values() const { return data; }

  /// Checks the element-count invariant and the fixed-point invariant.
  void validate() const;
  bool all_finite() const;
};

/// Row `index` of a rank>=2 tensor as an independent tensor with the trailing shape.
Tensor slice_row(const Tensor& batch, std::size_t index);

}  // namespace polyscore
