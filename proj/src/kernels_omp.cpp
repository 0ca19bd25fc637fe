#include <algorithm>

#include <omp.h>

#include "bdnn/kernels.hpp"
#include "kernel_body.hpp"

namespace bdnn::kernels {

void dense_layer_omp(std::span<const float> weights, std::size_t out_maps, std::size_t dim,
                     std::span<const float> patches, std::size_t positions,
                     std::span<const float> bias, std::span<float> out, int threads) {
  detail::check_dense(weights, out_maps, dim, patches, positions, bias, out);
  const auto n_maps = static_cast<std::ptrdiff_t>(out_maps);
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1))
  for (std::ptrdiff_t n = 0; n < n_maps; ++n)
    detail::dense_row(weights, static_cast<std::size_t>(n), dim, patches, positions, bias, out);
}

void binary_layer_omp(std::span<const BinaryBasis> bases, const BitplanePatches& patches,
                      std::span<const float> bias, std::span<float> out, int threads) {
  detail::check_binary(bases, patches, bias, out);
  const auto n_maps = static_cast<std::ptrdiff_t>(bases.size());
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1))
  for (std::ptrdiff_t n = 0; n < n_maps; ++n)
    detail::binary_row(bases, static_cast<std::size_t>(n), patches, bias, out);
}

void pack_patches_omp(std::span<const std::uint32_t> levels, const PatchGeometry& g,
                      std::uint32_t pad_level, BitplanePatches& patches, int threads) {
  detail::check_pack(levels, g, patches);
  const auto positions = static_cast<std::ptrdiff_t>(g.out_h * g.out_w);
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1))
  for (std::ptrdiff_t p = 0; p < positions; ++p) {
    const auto up = static_cast<std::size_t>(p);
    detail::pack_position(levels, g, pad_level, up / g.out_w, up % g.out_w, patches);
  }
}

}  // namespace bdnn::kernels
