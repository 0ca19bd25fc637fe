#pragma once

// Layer kernels in two flavours: a serial reference and an OpenMP version
// parallel over output maps. Both evaluate each output with the same
// operation order, so their results are bit-identical.

#include <cstddef>
#include <cstdint>
#include <span>

#include "bdnn/binary_basis.hpp"
#include "bdnn/bitkernel.hpp"

namespace bdnn::kernels {

// out[n * positions + p] = bias[n] + sum_d weights[n * dim + d] * patches[p * dim + d]
void dense_layer_serial(std::span<const float> weights, std::size_t out_maps, std::size_t dim,
                        std::span<const float> patches, std::size_t positions,
                        std::span<const float> bias, std::span<float> out);
void dense_layer_omp(std::span<const float> weights, std::size_t out_maps, std::size_t dim,
                     std::span<const float> patches, std::size_t positions,
                     std::span<const float> bias, std::span<float> out, int threads);

// out[n * positions + p] = bias[n] + approx_dot(bases[n], patches.view(p))
void binary_layer_serial(std::span<const BinaryBasis> bases, const BitplanePatches& patches,
                         std::span<const float> bias, std::span<float> out);
void binary_layer_omp(std::span<const BinaryBasis> bases, const BitplanePatches& patches,
                      std::span<const float> bias, std::span<float> out, int threads);

struct PatchGeometry {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
};

// Fills patches.words / patches.pops from per-element levels; padded
// positions take pad_level. patches must already be sized.
void pack_patches_serial(std::span<const std::uint32_t> levels, const PatchGeometry& g,
                         std::uint32_t pad_level, BitplanePatches& patches);
void pack_patches_omp(std::span<const std::uint32_t> levels, const PatchGeometry& g,
                      std::uint32_t pad_level, BitplanePatches& patches, int threads);

}  // namespace bdnn::kernels
