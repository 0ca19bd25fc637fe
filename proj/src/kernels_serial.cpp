#include "bdnn/kernels.hpp"
#include "kernel_body.hpp"

namespace bdnn::kernels {

void dense_layer_serial(std::span<const float> weights, std::size_t out_maps, std::size_t dim,
                        std::span<const float> patches, std::size_t positions,
                        std::span<const float> bias, std::span<float> out) {
  detail::check_dense(weights, out_maps, dim, patches, positions, bias, out);
  for (std::size_t n = 0; n < out_maps; ++n)
    detail::dense_row(weights, n, dim, patches, positions, bias, out);
}

void binary_layer_serial(std::span<const BinaryBasis> bases, const BitplanePatches& patches,
                         std::span<const float> bias, std::span<float> out) {
  detail::check_binary(bases, patches, bias, out);
  for (std::size_t n = 0; n < bases.size(); ++n) detail::binary_row(bases, n, patches, bias, out);
}

void pack_patches_serial(std::span<const std::uint32_t> levels, const PatchGeometry& g,
                         std::uint32_t pad_level, BitplanePatches& patches) {
  detail::check_pack(levels, g, patches);
  for (std::size_t oy = 0; oy < g.out_h; ++oy)
    for (std::size_t ox = 0; ox < g.out_w; ++ox)
      detail::pack_position(levels, g, pad_level, oy, ox, patches);
}

}  // namespace bdnn::kernels
