#include "bdnn/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "bdnn/error.hpp"

namespace bdnn {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteWeight: return "NonFiniteWeight";
    case ErrorCode::KernelLargerThanInput: return "KernelLargerThanInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadBitDepth: return "BadBitDepth";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::TruncatedBlob: return "TruncatedBlob";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

[[noreturn]] void shape_mismatch(std::size_t layer, const std::string& expected,
                                 const std::string& actual) {
  throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(layer) + ": expected " +
                                            expected + ", got " + actual);
}

}  // namespace

// ---- Tensor ----

std::size_t shape_product(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0F) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "tensor shape " + shape_str(shape_) + " holds " +
                                              std::to_string(shape_product(shape_)) +
                                              " values, data has " +
                                              std::to_string(data_.size()));
  }
}

float& Tensor::at(std::span<const std::size_t> index) { return data_[flatten_index(shape_, index)]; }

float Tensor::at(std::span<const std::size_t> index) const {
  return data_[flatten_index(shape_, index)];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const noexcept {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::size_t flatten_index(const Shape& shape, std::span<const std::size_t> index) {
  if (index.size() != shape.size())
    throw Error(ErrorCode::DimensionMismatch, "index rank differs from tensor rank");
  std::size_t flat = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (index[a] >= shape[a]) throw Error(ErrorCode::DimensionMismatch, "index out of range");
    flat = flat * shape[a] + index[a];
  }
  return flat;
}

std::vector<std::size_t> unflatten_index(const Shape& shape, std::size_t flat) {
  if (flat >= shape_product(shape)) throw Error(ErrorCode::DimensionMismatch, "flat index out of range");
  std::vector<std::size_t> index(shape.size());
  for (std::size_t a = shape.size(); a-- > 0;) {
    index[a] = flat % shape[a];
    flat /= shape[a];
  }
  return index;
}

// ---- LayerSpec ----

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Fc: return "fc";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  if (name == "conv") return LayerKind::Conv;
  if (name == "fc") return LayerKind::Fc;
  if (name == "relu") return LayerKind::Relu;
  if (name == "maxpool") return LayerKind::MaxPool;
  throw Error(ErrorCode::CorruptManifest, "unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv(std::size_t out_maps, std::size_t in_maps, std::size_t kernel,
                          std::size_t stride, std::size_t pad) {
  return {LayerKind::Conv, out_maps, in_maps, kernel, stride, pad};
}

LayerSpec LayerSpec::fc(std::size_t in_dim, std::size_t out_dim) {
  return {LayerKind::Fc, out_dim, in_dim, 0, 1, 0};
}

LayerSpec LayerSpec::relu() { return {LayerKind::Relu, 0, 0, 0, 1, 0}; }

LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
  return {LayerKind::MaxPool, 0, 0, window, stride, 0};
}

std::size_t LayerSpec::weight_dim() const noexcept {
  switch (kind) {
    case LayerKind::Conv: return in_maps * kernel * kernel;
    case LayerKind::Fc: return in_maps;
    default: return 0;
  }
}

Shape LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::Conv: return {out_maps, in_maps, kernel, kernel};
    case LayerKind::Fc: return {out_maps, in_maps};
    default: return {};
  }
}

Shape LayerSpec::output_shape(const Shape& input, std::size_t layer_index) const {
  switch (kind) {
    case LayerKind::Conv: {
      if (out_maps < 1 || in_maps < 1 || kernel < 1 || stride < 1)
        throw Error(ErrorCode::ShapeMismatch,
                    "layer " + std::to_string(layer_index) + ": conv extents must be >= 1");
      if (input.size() != 3)
        shape_mismatch(layer_index, "3-d input (maps x h x w)", shape_str(input));
      if (input[0] != in_maps)
        shape_mismatch(layer_index, std::to_string(in_maps) + " input maps",
                       std::to_string(input[0]));
      return {out_maps, conv_output_extent(input[1], kernel, stride, pad),
              conv_output_extent(input[2], kernel, stride, pad)};
    }
    case LayerKind::Fc: {
      if (out_maps < 1 || in_maps < 1)
        throw Error(ErrorCode::ShapeMismatch,
                    "layer " + std::to_string(layer_index) + ": fc extents must be >= 1");
      const std::size_t flat = shape_product(input);
      if (flat != in_maps)
        shape_mismatch(layer_index, std::to_string(in_maps) + " inputs", std::to_string(flat));
      return {out_maps};
    }
    case LayerKind::Relu: return input;
    case LayerKind::MaxPool: {
      if (kernel < 1 || stride < 1)
        throw Error(ErrorCode::ShapeMismatch,
                    "layer " + std::to_string(layer_index) + ": pool window/stride must be >= 1");
      if (input.size() != 3)
        shape_mismatch(layer_index, "3-d input (maps x h x w)", shape_str(input));
      return {input[0], conv_output_extent(input[1], kernel, stride, 0),
              conv_output_extent(input[2], kernel, stride, 0)};
    }
  }
  return input;
}

std::vector<Shape> ModelShape::activation_shapes() const {
  std::vector<Shape> shapes{input};
  shapes.reserve(layers.size() + 1);
  for (std::size_t i = 0; i < layers.size(); ++i)
    shapes.push_back(layers[i].output_shape(shapes.back(), i));
  return shapes;
}

std::size_t conv_output_extent(std::size_t in_extent, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (in_extent + 2 * pad < kernel)
    throw Error(ErrorCode::KernelLargerThanInput,
                "kernel " + std::to_string(kernel) + " exceeds padded extent " +
                    std::to_string(in_extent + 2 * pad));
  if (stride == 0) throw Error(ErrorCode::BadConfig, "stride must be >= 1");
  return (in_extent + 2 * pad - kernel) / stride + 1;
}

void validate_shape(const ModelShape& shape) {
  if (shape.layers.empty()) throw Error(ErrorCode::ShapeMismatch, "model has no layers");
  if (shape.input.empty() || shape_product(shape.input) == 0)
    throw Error(ErrorCode::ShapeMismatch, "model input shape is empty");
  (void)shape.activation_shapes();
}

void validate_model(const NetworkModel& model) {
  validate_shape(model.shape);
  if (model.params.size() != model.shape.layers.size())
    throw Error(ErrorCode::ShapeMismatch, "parameter list length " +
                                              std::to_string(model.params.size()) +
                                              " != layer count " +
                                              std::to_string(model.shape.layers.size()));
  for (std::size_t i = 0; i < model.shape.layers.size(); ++i) {
    const LayerSpec& spec = model.shape.layers[i];
    const LayerParams& p = model.params[i];
    if (!spec.has_weights()) continue;
    if (p.weights.shape() != spec.weight_shape())
      shape_mismatch(i, "weights " + shape_str(spec.weight_shape()), shape_str(p.weights.shape()));
    if (p.bias.shape() != Shape{spec.out_maps})
      shape_mismatch(i, "bias [" + std::to_string(spec.out_maps) + "]", shape_str(p.bias.shape()));
    if (!p.weights.all_finite() || !p.bias.all_finite())
      throw Error(ErrorCode::NonFiniteWeight, "layer " + std::to_string(i));
  }
}

}  // namespace bdnn
