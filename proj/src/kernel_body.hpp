#pragma once

// Per-output bodies shared by the serial and OpenMP kernels.

#include <cstddef>
#include <cstdint>
#include <span>

#include "bdnn/bitkernel.hpp"
#include "bdnn/error.hpp"
#include "bdnn/kernels.hpp"

namespace bdnn::kernels::detail {

// Plain scalar dot product with double accumulation; no manual vectorization.
inline float dense_output(const float* w, const float* x, std::size_t dim, float bias) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) acc += static_cast<double>(w[d]) * static_cast<double>(x[d]);
  return static_cast<float>(acc + static_cast<double>(bias));
}

inline void dense_row(std::span<const float> weights, std::size_t n, std::size_t dim,
                      std::span<const float> patches, std::size_t positions,
                      std::span<const float> bias, std::span<float> out) {
  const float* w = weights.data() + n * dim;
  for (std::size_t p = 0; p < positions; ++p)
    out[n * positions + p] = dense_output(w, patches.data() + p * dim, dim, bias[n]);
}

inline void binary_row(std::span<const BinaryBasis> bases, std::size_t n,
                       const BitplanePatches& patches, std::span<const float> bias,
                       std::span<float> out) {
  const BinaryBasis& basis = bases[n];
  for (std::size_t p = 0; p < patches.positions; ++p) {
    const double v = approx_dot(basis, patches.view(p), patches.significance, patches.x_min);
    out[n * patches.positions + p] = static_cast<float>(v + static_cast<double>(bias[n]));
  }
}

inline void check_dense(std::span<const float> weights, std::size_t out_maps, std::size_t dim,
                        std::span<const float> patches, std::size_t positions,
                        std::span<const float> bias, std::span<float> out) {
  if (weights.size() != out_maps * dim || patches.size() != positions * dim ||
      bias.size() != out_maps || out.size() != out_maps * positions)
    throw Error(ErrorCode::ShapeMismatch, "dense layer operand sizes disagree");
}

inline void check_binary(std::span<const BinaryBasis> bases, const BitplanePatches& patches,
                         std::span<const float> bias, std::span<float> out) {
  if (bias.size() != bases.size() || out.size() != bases.size() * patches.positions)
    throw Error(ErrorCode::ShapeMismatch, "binary layer operand sizes disagree");
  if (patches.bits < 1 || patches.bits > kMaxBitDepth)
    throw Error(ErrorCode::BadBitDepth, "patch bit depth out of range");
  for (const BinaryBasis& b : bases)
    if (b.dim() != patches.dim)
      throw Error(ErrorCode::ShapeMismatch, "basis dim " + std::to_string(b.dim()) +
                                                " vs patch dim " + std::to_string(patches.dim));
}

// Packs the receptive field of output position (oy, ox) into Q planes.
inline void pack_position(std::span<const std::uint32_t> levels, const PatchGeometry& g,
                          std::uint32_t pad_level, std::size_t oy, std::size_t ox,
                          BitplanePatches& patches) {
  const std::size_t p = oy * g.out_w + ox;
  const auto bits = static_cast<std::size_t>(patches.bits);
  const std::size_t wpp = patches.words_per_plane;
  std::uint64_t* base = patches.words.data() + p * bits * wpp;
  std::int64_t* pops = patches.pops.data() + p * bits;
  for (std::size_t i = 0; i < bits * wpp; ++i) base[i] = 0;

  std::size_t d = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                static_cast<std::ptrdiff_t>(g.pad);
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++d) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                            ix < static_cast<std::ptrdiff_t>(g.width);
        const std::uint32_t level =
            inside ? levels[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                            static_cast<std::size_t>(ix)]
                   : pad_level;
        const std::uint64_t bit = std::uint64_t{1} << (d % kWordBits);
        for (std::size_t q = 0; q < bits; ++q)
          if ((level >> q) & 1U) base[q * wpp + d / kWordBits] |= bit;
      }
    }
  }
  for (std::size_t q = 0; q < bits; ++q) {
    std::int64_t pop = 0;
    for (std::size_t i = 0; i < wpp; ++i) pop += popcount64(base[q * wpp + i]);
    pops[q] = pop;
  }
}

inline void check_pack(std::span<const std::uint32_t> levels, const PatchGeometry& g,
                       const BitplanePatches& patches) {
  const auto bits = static_cast<std::size_t>(patches.bits);
  if (levels.size() != g.channels * g.height * g.width ||
      patches.positions != g.out_h * g.out_w ||
      patches.dim != g.channels * g.kernel * g.kernel ||
      patches.words_per_plane != words_for(patches.dim) ||
      patches.words.size() != patches.positions * bits * patches.words_per_plane ||
      patches.pops.size() != patches.positions * bits)
    throw Error(ErrorCode::ShapeMismatch, "patch buffers do not match the geometry");
}

}  // namespace bdnn::kernels::detail
