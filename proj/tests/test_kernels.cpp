#include <cstring>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

#include "bdnn/inference.hpp"
#include "bdnn/kernels.hpp"
#include "bdnn/synthetic.hpp"

using namespace bdnn;

namespace {

std::vector<BinaryBasis> random_bases(std::size_t n, std::size_t dim, std::size_t k, std::mt19937_64& rng) {
  std::vector<BinaryBasis> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(BinaryBasis::from_codes(oracle::random_codes(dim, k, rng), k, oracle::gaussian_vector(k, rng)));
  return out;
}

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

BitplanePatches sized_patches(const kernels::PatchGeometry& g, int bits) {
  BitplanePatches p;
  p.dim = g.channels * g.kernel * g.kernel;
  p.positions = g.out_h * g.out_w;
  p.words_per_plane = words_for(p.dim);
  p.bits = bits;
  p.words.assign(p.positions * static_cast<std::size_t>(bits) * p.words_per_plane, 0);
  p.pops.assign(p.positions * static_cast<std::size_t>(bits), 0);
  return p;
}

}  // namespace

TEST_CASE("dense layer: serial and parallel are bit-identical") {
  std::mt19937_64 rng(31);
  const std::size_t n = 37, dim = 145, positions = 23;
  const Tensor w = random_tensor({n, dim}, 1), x = random_tensor({positions, dim}, 2), b = random_tensor({n}, 3);
  std::vector<float> ref(n * positions), par(n * positions);
  kernels::dense_layer_serial(w.data(), n, dim, x.data(), positions, b.data(), ref);
  for (int threads : {1, 2, 3, 4}) {
    std::fill(par.begin(), par.end(), 0.0F);
    kernels::dense_layer_omp(w.data(), n, dim, x.data(), positions, b.data(), par, threads);
    CHECK(same_bits(ref, par));
  }
  // spot check against a plain sum
  double s = b[5];
  for (std::size_t d = 0; d < dim; ++d) s += static_cast<double>(w[5 * dim + d]) * x[7 * dim + d];
  CHECK(ref[5 * positions + 7] == doctest::Approx(s).epsilon(1e-6));

  std::vector<float> small(3);
  CHECK_ERROR_CODE(kernels::dense_layer_serial(w.data(), n, dim, x.data(), positions, b.data(), small),
                   ErrorCode::ShapeMismatch);
}

TEST_CASE("binary layer: serial and parallel are bit-identical") {
  std::mt19937_64 rng(32);
  const Tensor input = random_tensor({5, 9, 9}, 4);
  const BitplanePatches patches = quantize_patches(input, 3, 1, 1, 6);
  const auto bases = random_bases(19, patches.dim, 5, rng);
  const Tensor b = random_tensor({19}, 5);
  std::vector<float> ref(19 * patches.positions), par(ref.size());
  kernels::binary_layer_serial(bases, patches, b.data(), ref);
  for (int threads : {1, 2, 3, 4}) {
    std::fill(par.begin(), par.end(), 0.0F);
    kernels::binary_layer_omp(bases, patches, b.data(), par, threads);
    CHECK(same_bits(ref, par));
  }
  CHECK(ref[3 * patches.positions + 10] ==
        doctest::Approx(b[3] + approx_dot(bases[3], patches.view(10), patches.significance, patches.x_min)));

  const auto wrong_dim = random_bases(19, patches.dim + 1, 5, rng);
  CHECK_ERROR_CODE(kernels::binary_layer_serial(wrong_dim, patches, b.data(), ref), ErrorCode::ShapeMismatch);
}

TEST_CASE("patch packing: serial and parallel agree") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    kernels::PatchGeometry g;
    g.channels = 1 + rng() % 6;
    g.height = 3 + rng() % 12;
    g.width = 3 + rng() % 12;
    g.kernel = 1 + rng() % 3;
    g.stride = 1 + rng() % 2;
    g.pad = rng() % 2;
    g.out_h = conv_output_extent(g.height, g.kernel, g.stride, g.pad);
    g.out_w = conv_output_extent(g.width, g.kernel, g.stride, g.pad);
    const int bits = 1 + static_cast<int>(rng() % 8);
    std::vector<std::uint32_t> levels(g.channels * g.height * g.width);
    for (auto& l : levels) l = static_cast<std::uint32_t>(rng() % (1U << bits));
    const auto pad_level = static_cast<std::uint32_t>(rng() % (1U << bits));

    BitplanePatches ref = sized_patches(g, bits), par = sized_patches(g, bits);
    kernels::pack_patches_serial(levels, g, pad_level, ref);
    kernels::pack_patches_omp(levels, g, pad_level, par, 3);
    CHECK(ref.words == par.words);
    CHECK(ref.pops == par.pops);

    // every packed position holds the levels of its receptive field
    const std::size_t p = rng() % ref.positions;
    const std::size_t oy = p / g.out_w, ox = p % g.out_w;
    ref.x_min = 0.0;
    ref.step = 1.0;
    ref.significance = significance_vector(1.0, bits);
    const QuantizedMap col = ref.column(p);
    std::size_t d = 0;
    for (std::size_t c = 0; c < g.channels; ++c)
      for (std::size_t ky = 0; ky < g.kernel; ++ky)
        for (std::size_t kx = 0; kx < g.kernel; ++kx, ++d) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
          const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) && ix < static_cast<long>(g.width);
          const std::uint32_t want =
              inside ? levels[(c * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)]
                     : pad_level;
          CHECK(col.level(d) == want);
        }
  }
}

TEST_CASE("parallel forward matches serial forward") {
  const ModelShape s{"t", {3, 12, 12}, {LayerSpec::conv(6, 3, 3, 1, 1), LayerSpec::relu(),
                                        LayerSpec::maxpool(2, 2), LayerSpec::fc(6 * 6 * 6, 5)}};
  const NetworkModel m = generate_synthetic(s, {});
  DecomposeConfig cfg;
  cfg.rank = 3;
  cfg.restarts = 2;
  const DecomposedModel dm = decompose_model(m, cfg);
  const Tensor x = random_tensor(s.input, 9);
  const Tensor a = forward(dm, x, {Mode::Approx, 6, 1});
  const Tensor b = forward(dm, x, {Mode::Approx, 6, 4});
  CHECK(same_bits(a.data(), b.data()));
  CHECK(same_bits(forward(m, x, 1).data(), forward(m, x, 4).data()));
}
