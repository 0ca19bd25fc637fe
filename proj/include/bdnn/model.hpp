#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bdnn/tensor.hpp"

namespace bdnn {

enum class LayerKind { Conv, Fc, Relu, MaxPool };

const char* to_string(LayerKind kind) noexcept;
LayerKind layer_kind_from_string(const std::string& name);

// Geometry of one layer. Conv uses out_maps/in_maps/kernel/stride/pad,
// Fc uses in_maps (as input dim M) and out_maps (N), MaxPool uses
// kernel (window) and stride.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t out_maps = 0;
  std::size_t in_maps = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;

  static LayerSpec conv(std::size_t out_maps, std::size_t in_maps, std::size_t kernel,
                        std::size_t stride = 1, std::size_t pad = 0);
  static LayerSpec fc(std::size_t in_dim, std::size_t out_dim);
  static LayerSpec relu();
  static LayerSpec maxpool(std::size_t window, std::size_t stride);

  bool has_weights() const noexcept { return kind == LayerKind::Conv || kind == LayerKind::Fc; }

  /// Length of one filter/unit weight vector: M*H*H for conv, M for fc.
  std::size_t weight_dim() const noexcept;

  /// Weight tensor shape: N x M x H x H (conv) or N x M (fc).
  Shape weight_shape() const;

  /// Output activation shape for a given input shape; throws ShapeMismatch.
  Shape output_shape(const Shape& input, std::size_t layer_index) const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Geometry-only view of a network: enough for validation and accounting.
struct ModelShape {
  std::string name;
  Shape input;
  std::vector<LayerSpec> layers;

  /// Activation shapes: [0] is the input, [i+1] the output of layer i.
  std::vector<Shape> activation_shapes() const;
};

struct LayerParams {
  Tensor weights;  // empty for relu/maxpool
  Tensor bias;     // length N, empty for relu/maxpool
};

struct NetworkModel {
  ModelShape shape;
  std::vector<LayerParams> params;  // one entry per layer

  const std::string& name() const noexcept { return shape.name; }
  std::size_t size() const noexcept { return shape.layers.size(); }
};

std::size_t conv_output_extent(std::size_t in_extent, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

void validate_shape(const ModelShape& shape);

/// Throws ShapeMismatch or NonFiniteWeight naming the offending layer.
void validate_model(const NetworkModel& model);

}  // namespace bdnn
