#include "quantizer/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common/error.hpp"

namespace polyscore::quant {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void set_midpoint_boundaries(Codebook& cb) {
  const auto k = cb.centroids.size();
  cb.boundaries.assign(k + 1, 0.0);
  cb.boundaries.front() = -kInf;
  cb.boundaries.back() = kInf;
  for (std::size_t i = 1; i < k; ++i) cb.boundaries[i] = 0.5 * (cb.centroids[i - 1] + cb.centroids[i]);
}

std::size_t find_zero(const std::vector<double>& c) {
  const auto it = std::find(c.begin(), c.end(), 0.0);
  require(it != c.end(), ErrorCode::InvalidArgument, "codebook lacks the zero centroid");
  return static_cast<std::size_t>(it - c.begin());
}

// Index of the first sorted sample that belongs to bin i+1 rather than bin i.
std::size_t split_index(std::span<const double> sorted, const Codebook& cb, std::size_t i) {
  const double b = cb.boundaries[i + 1];
  const bool tie_left = std::fabs(cb.centroids[i]) <= std::fabs(cb.centroids[i + 1]);
  const auto it = tie_left ? std::upper_bound(sorted.begin(), sorted.end(), b)
                           : std::lower_bound(sorted.begin(), sorted.end(), b);
  return static_cast<std::size_t>(it - sorted.begin());
}

std::int64_t round_half_to_smaller_magnitude(double x) {
  const double f = std::floor(x);
  const double frac = x - f;
  if (frac > 0.5) return static_cast<std::int64_t>(f) + 1;
  if (frac < 0.5) return static_cast<std::int64_t>(f);
  // exact tie: pick the neighbour nearer zero
  return f >= 0 ? static_cast<std::int64_t>(f) : static_cast<std::int64_t>(f) + 1;
}

}  // namespace

bool supported_bits(int bits) { return bits == 2 || bits == 4 || bits == 8 || bits == 16; }

std::size_t Codebook::size() const {
  return is_fixed_point() ? (std::size_t{1} << bits) : centroids.size();
}

std::size_t Codebook::bin_of(double v) const {
  // boundaries[1..k-1] are the interior cuts
  const auto first = boundaries.begin() + 1;
  const auto last = boundaries.end() - 1;
  auto it = std::lower_bound(first, last, v);
  auto i = static_cast<std::size_t>(it - first);
  if (it != last && *it == v) {
    // v sits exactly on the cut between bins i and i+1
    if (std::fabs(centroids[i + 1]) < std::fabs(centroids[i])) ++i;
  }
  return i;
}

double Codebook::quantize(double v) const {
  if (is_fixed_point()) {
    const double scaled = std::ldexp(v, *fixed_scale_bits);
    const auto lim = (std::int64_t{1} << (bits - 1));
    auto q = round_half_to_smaller_magnitude(scaled);
    q = std::clamp<std::int64_t>(q, -lim, lim - 1);
    return std::ldexp(static_cast<double>(q), -*fixed_scale_bits);
  }
  return centroids[bin_of(v)];
}

void Codebook::validate() const {
  require(supported_bits(bits), ErrorCode::InvalidArgument, "codebook bit width must be 2, 4, 8 or 16");
  if (is_fixed_point()) return;
  require(!centroids.empty() && centroids.size() <= (std::size_t{1} << bits), ErrorCode::InvalidArgument,
          "codebook size out of range");
  require(boundaries.size() == centroids.size() + 1, ErrorCode::InvalidArgument, "boundary count mismatch");
  require(std::count(centroids.begin(), centroids.end(), 0.0) == 1, ErrorCode::InvalidArgument,
          "codebook must contain exactly one zero centroid");
  require(zero_index < centroids.size() && centroids[zero_index] == 0.0, ErrorCode::InvalidArgument,
          "zero index does not point at the zero centroid");
  for (std::size_t i = 1; i < centroids.size(); ++i)
    require(centroids[i - 1] < centroids[i], ErrorCode::InvalidArgument, "centroids must be strictly increasing");
  for (std::size_t i = 0; i < centroids.size(); ++i)
    require(boundaries[i] <= centroids[i] && centroids[i] <= boundaries[i + 1], ErrorCode::InvalidArgument,
            "centroid outside its bin");
}

Codebook fixed_point_codebook(std::span<const double> samples, int bits) {
  require(!samples.empty(), ErrorCode::InvalidArgument, "cannot fit a codebook to no samples");
  double max_abs = 0.0;
  for (double v : samples) max_abs = std::max(max_abs, std::fabs(v));
  Codebook cb;
  cb.bits = bits;
  const double limit = std::ldexp(1.0, bits - 1) - 1.0;
  int s = 40;
  if (max_abs > 0.0) {
    s = static_cast<int>(std::floor(std::log2(limit / max_abs)));
    while (std::ldexp(max_abs, s) > limit) --s;
    s = std::clamp(s, -32, 60);
  }
  cb.fixed_scale_bits = s;
  return cb;
}

Codebook fit_codebook(std::span<const double> samples, int bits) {
  require(!samples.empty(), ErrorCode::InvalidArgument, "cannot fit a codebook to no samples");
  require(supported_bits(bits), ErrorCode::InvalidArgument, "bits must be 2, 4, 8 or 16");
  for (double v : samples) require(std::isfinite(v), ErrorCode::NonFinite, "codebook samples contain NaN/Inf");
  if (bits == 16) return fixed_point_codebook(samples, bits);

  const std::size_t levels = std::size_t{1} << bits;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  Codebook cb;
  cb.bits = bits;

  std::vector<double> distinct;
  std::unique_copy(sorted.begin(), sorted.end(), std::back_inserter(distinct));
  std::erase(distinct, 0.0);
  if (distinct.size() + 1 <= levels) {
    // Every distinct value gets its own centroid; zero-MSE and nothing to iterate.
    cb.centroids = distinct;
    cb.centroids.push_back(0.0);
    std::sort(cb.centroids.begin(), cb.centroids.end());
    cb.zero_index = find_zero(cb.centroids);
    set_midpoint_boundaries(cb);
    return cb;
  }

  // Uniform grid over the sample range with the point nearest zero pinned to
  // zero; Lloyd iterations only lower the distortion from there.
  const std::size_t n = sorted.size();
  const double lo = sorted.front(), hi = sorted.back();
  std::vector<double> c(levels);
  for (std::size_t i = 0; i < levels; ++i) c[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(levels);
  auto nearest = std::min_element(c.begin(), c.end(), [](double a, double b) { return std::fabs(a) < std::fabs(b); });
  *nearest = 0.0;
  std::sort(c.begin(), c.end());
  cb.centroids = std::move(c);
  cb.zero_index = find_zero(cb.centroids);

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sorted[i];

  for (int iter = 0; iter < kLloydMaxIterations; ++iter) {
    set_midpoint_boundaries(cb);
    double movement = 0.0;
    std::size_t lo = 0;
    std::vector<double> next = cb.centroids;
    for (std::size_t i = 0; i < cb.centroids.size(); ++i) {
      const std::size_t hi = i + 1 < cb.centroids.size() ? split_index(sorted, cb, i) : n;
      if (i != cb.zero_index && hi > lo) {
        next[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
        movement = std::max(movement, std::fabs(next[i] - cb.centroids[i]));
      }
      lo = std::max(lo, hi);
    }
    cb.centroids = std::move(next);
    if (movement < kLloydTolerance) break;
  }
  set_midpoint_boundaries(cb);
  cb.validate();
  return cb;
}

void quantize_in_place(std::span<double> x, const Codebook& cb) {
  for (auto& v : x) v = cb.quantize(v);
}

Tensor quantize(const Tensor& x, std::shared_ptr<const Codebook> cb) {
  require(cb != nullptr, ErrorCode::InvalidArgument, "null codebook");
  Tensor y = x;
  y.fixed_point.reset();
  quantize_in_place(y.data, *cb);
  y.codebook = std::move(cb);
  return y;
}

double quantization_mse(std::span<const double> samples, const Codebook& cb) {
  require(!samples.empty(), ErrorCode::InvalidArgument, "empty sample set");
  double acc = 0.0;
  for (double v : samples) {
    const double e = v - cb.quantize(v);
    acc += e * e;
  }
  return acc / static_cast<double>(samples.size());
}

Tensor to_fixed_point(const Tensor& x, int scale_bits, int total_bits) {
  require(scale_bits >= 1 && scale_bits <= 24, ErrorCode::InvalidArgument, "scale_bits must lie in [1, 24]");
  require(total_bits >= 2 && total_bits <= 63, ErrorCode::InvalidArgument, "total_bits must lie in [2, 63]");
  Tensor y = x;
  y.codebook.reset();
  const double limit = std::ldexp(1.0, total_bits - 1);
  for (auto& v : y.data) {
    const double q = std::round(std::ldexp(v, scale_bits));
    require(q >= -limit && q < limit, ErrorCode::Overflow,
            "value does not fit a " + std::to_string(total_bits) + "-bit fixed-point word");
    v = std::ldexp(q, -scale_bits);
  }
  y.fixed_point = FixedPointTag{scale_bits, total_bits};
  return y;
}

}  // namespace polyscore::quant
