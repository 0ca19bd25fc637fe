#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bdnn/binary_basis.hpp"
#include "bdnn/packed_bits.hpp"
#include "bdnn/quantizer.hpp"

namespace bdnn {

/// m^T b for m in {-1,+1}^D (bit set <=> +1) and b in {0,1}^D:
/// 2 * popcount(m & b) - |b|. Throws LengthMismatch.
std::int64_t binary_dot(const PackedBits& m, const PackedBits& b);

/// Same identity on raw words; b_pop is popcount(b).
inline std::int64_t binary_dot_words(const std::uint64_t* m, const std::uint64_t* b,
                                     std::size_t words, std::int64_t b_pop) noexcept {
  std::int64_t both = 0;
  for (std::size_t w = 0; w < words; ++w) both += popcount64(m[w] & b[w]);
  return 2 * both - b_pop;
}

// Bitplane view of one activation vector: Q planes of `words` words each,
// laid out plane-major, with per-plane popcounts.
struct PlaneView {
  const std::uint64_t* words = nullptr;
  const std::int64_t* pops = nullptr;
  std::size_t words_per_plane = 0;
  int bits = 0;
};

/// c^T M^T B r + offset_scale * (c^T M^T 1) * x_min. The k x Q table of
/// integer dot products is filled first, then contracted with r and c.
double approx_dot(const BinaryBasis& basis, PlaneView planes, std::span<const double> significance,
                  double x_min, double offset_scale = 1.0);

double approx_dot(const BinaryBasis& basis, const QuantizedMap& q, double offset_scale = 1.0);

// Quantized im2col: for every output position the Q packed bitplanes of its
// receptive field, all sharing one (x_min, step). Layout [position][plane][word].
struct BitplanePatches {
  std::size_t dim = 0;
  std::size_t positions = 0;
  std::size_t words_per_plane = 0;
  int bits = 0;
  std::vector<std::uint64_t> words;
  std::vector<std::int64_t> pops;  // [position][plane]
  std::vector<double> significance;
  double x_min = 0.0;
  double step = 0.0;

  PlaneView view(std::size_t position) const noexcept {
    const std::size_t planes = static_cast<std::size_t>(bits);
    return {words.data() + position * planes * words_per_plane, pops.data() + position * planes,
            words_per_plane, bits};
  }

  /// Materializes one position as a standalone QuantizedMap.
  QuantizedMap column(std::size_t position) const;

  static BitplanePatches from_map(const QuantizedMap& q);
};

}  // namespace bdnn
