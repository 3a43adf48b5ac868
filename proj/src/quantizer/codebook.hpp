#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "netcore/tensor.hpp"

namespace polyscore::quant {

/// Scalar quantizer for one tensor. Either an explicit Lloyd-Max table
/// (centroids + bin boundaries, with 0.0 always a centroid) or, in 16-bit mode,
/// a uniform fixed-point grid of step 2^-fixed_scale_bits.
struct Codebook {
  int bits = 8;
  std::vector<double> centroids;   // strictly increasing
  std::vector<double> boundaries;  // centroids.size() + 1 entries, -inf ... +inf
  std::size_t zero_index = 0;
  std::optional<int> fixed_scale_bits;

  bool is_fixed_point() const { return fixed_scale_bits.has_value(); }
  std::size_t size() const;

  /// Nearest centroid; exact ties go to the centroid of smaller magnitude.
  double quantize(double v) const;
  std::size_t bin_of(double v) const;

  void validate() const;
};

inline constexpr double kLloydTolerance = 1e-7;
inline constexpr int kLloydMaxIterations = 200;

bool supported_bits(int bits);

/// Lloyd-Max fit with a pinned zero centroid. 16 bits yields a fixed-point grid.
Codebook fit_codebook(std::span<const double> samples, int bits);
inline Codebook fit_codebook(const Tensor& samples, int bits) { return fit_codebook(samples.values(), bits); }

/// Fixed-point codebook with the finest scale whose signed `bits` word covers max|samples|.
Codebook fixed_point_codebook(std::span<const double> samples, int bits);

Tensor quantize(const Tensor& x, std::shared_ptr<const Codebook> cb);
void quantize_in_place(std::span<double> x, const Codebook& cb);

double quantization_mse(std::span<const double> samples, const Codebook& cb);

/// v -> round(v * 2^scale_bits) / 2^scale_bits, tagged fixed-point. Throws
/// Overflow if an integer does not fit a signed `total_bits` word.
Tensor to_fixed_point(const Tensor& x, int scale_bits, int total_bits = 32);

}  // namespace polyscore::quant
