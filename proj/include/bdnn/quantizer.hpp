#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bdnn/packed_bits.hpp"

namespace bdnn {

inline constexpr int kMaxBitDepth = 16;

// Q bitplanes of a D-element activation plus what is needed to reconstruct
// x_d ~= sum_q B[d][q] * r_q + x_min with r_q = step * 2^q.
struct QuantizedMap {
  std::size_t dim = 0;
  int bits = 0;
  std::vector<PackedBits> planes;  // planes[q] holds bit q of every level
  std::vector<double> significance;
  double x_min = 0.0;
  double step = 0.0;

  std::int64_t plane_pop(int q) const { return planes[static_cast<std::size_t>(q)].pop(); }
  std::uint32_t level(std::size_t d) const noexcept;
};

/// (max - min) / (2^Q - 1). Throws EmptyInput / BadBitDepth.
double quantization_step(std::span<const float> x, int bits);

/// Nearest-level index of a value under (x_min, step), clamped to [0, 2^Q-1].
std::uint32_t quantize_level(double value, double x_min, double step, int bits) noexcept;

std::vector<double> significance_vector(double step, int bits);

QuantizedMap quantize(std::span<const float> x, int bits);

/// Bitplanes from precomputed levels sharing an (x_min, step) range.
QuantizedMap quantize_levels(std::span<const std::uint32_t> levels, int bits, double x_min,
                             double step);

std::vector<double> dequantize(const QuantizedMap& q);

}  // namespace bdnn
