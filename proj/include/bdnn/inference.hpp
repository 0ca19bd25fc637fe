#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bdnn/binary_basis.hpp"
#include "bdnn/bitkernel.hpp"
#include "bdnn/decompose.hpp"
#include "bdnn/model.hpp"
#include "bdnn/tensor.hpp"

namespace bdnn {

struct DecomposedLayer {
  LayerSpec spec;
  std::vector<BinaryBasis> bases;
  Tensor exact_weights;  // non-empty: the layer is kept exact
  Tensor bias;

  bool is_decomposed() const noexcept { return spec.has_weights() && exact_weights.size() == 0; }
};

struct DecomposedModel {
  ModelShape shape;
  std::vector<DecomposedLayer> layers;
  std::size_t rank = 0;
  int default_bits = 6;
  std::string source_name;
  std::uint64_t source_hash = 0;

  /// Dense model with every decomposed layer replaced by M c.
  NetworkModel reconstructed() const;
};

void validate_decomposed(const DecomposedModel& model);

struct DecomposeOptions {
  int threads = 1;
  bool keep_exact_first = false;
};

struct LayerResidual {
  std::size_t layer = 0;
  std::vector<double> costs;
  double weight_norm_sq = 0.0;
};

DecomposedModel decompose_model(const NetworkModel& model, const DecomposeConfig& cfg,
                                const DecomposeOptions& opts = {},
                                std::vector<LayerResidual>* residuals = nullptr);

/// Copies the dense weights of `layer` from `source` so it runs exactly.
void keep_layer_exact(DecomposedModel& model, const NetworkModel& source, std::size_t layer);

/// Index of the first conv/fc layer; throws ShapeMismatch if there is none.
std::size_t first_weighted_layer(const ModelShape& shape);

/// One flattened receptive field per output position, channel-major then
/// row-major spatial, matching the filter flattening used by decomposition.
struct PatchMatrix {
  std::size_t dim = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::vector<float> values;  // [position][dim]

  std::size_t positions() const noexcept { return out_h * out_w; }
  std::span<const float> column(std::size_t p) const noexcept {
    return {values.data() + p * dim, dim};
  }
};

PatchMatrix im2col(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Quantizes the whole input once, then gathers packed patches. With pad > 0
/// the range also covers 0 so padded positions reconstruct to ~0.
BitplanePatches quantize_patches(const Tensor& input, std::size_t kernel, std::size_t stride,
                                 std::size_t pad, int bits, int threads = 1);

Tensor conv_forward_exact(const Tensor& input, const Tensor& weights, const Tensor& bias,
                          const LayerSpec& spec, int threads = 1);
Tensor conv_forward_approx(const Tensor& input, std::span<const BinaryBasis> bases,
                           const Tensor& bias, const LayerSpec& spec, int bits, int threads = 1);

Tensor fc_forward_exact(const Tensor& x, const Tensor& weights, const Tensor& bias,
                        int threads = 1);
Tensor fc_forward_approx(const Tensor& x, std::span<const BinaryBasis> bases, const Tensor& bias,
                         int bits, int threads = 1);

Tensor relu(const Tensor& x);
Tensor maxpool(const Tensor& x, std::size_t window, std::size_t stride);

enum class Mode { Exact, Approx };

struct ForwardOptions {
  Mode mode = Mode::Approx;
  int bits = 6;
  int threads = 1;
};

/// Activations after every layer; the last entry is the network output.
std::vector<Tensor> forward_layers(const NetworkModel& model, const Tensor& input,
                                   int threads = 1);
std::vector<Tensor> forward_layers(const DecomposedModel& model, const Tensor& input,
                                   const ForwardOptions& opts);

Tensor forward(const NetworkModel& model, const Tensor& input, int threads = 1);

/// Approx mode quantizes the input of every decomposed layer at run time;
/// exact mode evaluates the reconstructed weights M c densely.
Tensor forward(const DecomposedModel& model, const Tensor& input, const ForwardOptions& opts);

}  // namespace bdnn
