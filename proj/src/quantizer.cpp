#include "bdnn/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bdnn/error.hpp"

namespace bdnn {

namespace {

void check_args(std::size_t n, int bits) {
  if (n == 0) throw Error(ErrorCode::EmptyInput, "cannot quantize an empty vector");
  if (bits < 1 || bits > kMaxBitDepth)
    throw Error(ErrorCode::BadBitDepth, "bit depth " + std::to_string(bits) + " not in [1, " +
                                            std::to_string(kMaxBitDepth) + "]");
}

double max_level(int bits) { return std::ldexp(1.0, bits) - 1.0; }

}  // namespace

std::uint32_t QuantizedMap::level(std::size_t d) const noexcept {
  std::uint32_t v = 0;
  for (int q = 0; q < bits; ++q)
    if (planes[static_cast<std::size_t>(q)].test(d)) v |= 1U << q;
  return v;
}

double quantization_step(std::span<const float> x, int bits) {
  check_args(x.size(), bits);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return (static_cast<double>(*hi) - static_cast<double>(*lo)) / max_level(bits);
}

std::uint32_t quantize_level(double value, double x_min, double step, int bits) noexcept {
  if (step <= 0.0) return 0;
  const double v = std::floor((value - x_min) / step + 0.5);
  return static_cast<std::uint32_t>(std::clamp(v, 0.0, max_level(bits)));
}

std::vector<double> significance_vector(double step, int bits) {
  std::vector<double> r(static_cast<std::size_t>(bits));
  for (int q = 0; q < bits; ++q) r[static_cast<std::size_t>(q)] = std::ldexp(step, q);
  return r;
}

QuantizedMap quantize(std::span<const float> x, int bits) {
  check_args(x.size(), bits);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double x_min = *lo;
  const double step = (static_cast<double>(*hi) - x_min) / max_level(bits);
  std::vector<std::uint32_t> levels(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) levels[d] = quantize_level(x[d], x_min, step, bits);
  return quantize_levels(levels, bits, x_min, step);
}

QuantizedMap quantize_levels(std::span<const std::uint32_t> levels, int bits, double x_min,
                             double step) {
  check_args(levels.size(), bits);
  const std::size_t words = words_for(levels.size());
  std::vector<std::vector<std::uint64_t>> planes(static_cast<std::size_t>(bits),
                                                 std::vector<std::uint64_t>(words, 0));
  for (std::size_t d = 0; d < levels.size(); ++d) {
    const std::uint64_t bit = std::uint64_t{1} << (d % kWordBits);
    for (int q = 0; q < bits; ++q)
      if ((levels[d] >> q) & 1U) planes[static_cast<std::size_t>(q)][d / kWordBits] |= bit;
  }
  QuantizedMap out;
  out.dim = levels.size();
  out.bits = bits;
  out.x_min = x_min;
  out.step = step;
  out.significance = significance_vector(step, bits);
  out.planes.reserve(planes.size());
  for (auto& p : planes) out.planes.emplace_back(levels.size(), std::move(p));
  return out;
}

std::vector<double> dequantize(const QuantizedMap& q) {
  std::vector<double> x(q.dim, q.x_min);
  for (int b = 0; b < q.bits; ++b) {
    const PackedBits& plane = q.planes[static_cast<std::size_t>(b)];
    const double r = q.significance[static_cast<std::size_t>(b)];
    for (std::size_t d = 0; d < q.dim; ++d)
      if (plane.test(d)) x[d] += r;
  }
  return x;
}

}  // namespace bdnn
