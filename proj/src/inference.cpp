#include "bdnn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bdnn/error.hpp"
#include "bdnn/kernels.hpp"
#include "bdnn/quantizer.hpp"

namespace bdnn {

namespace {

std::string layer_str(std::size_t i) { return "layer " + std::to_string(i); }

Tensor reconstruct_weights(const DecomposedLayer& layer) {
  const std::size_t dim = layer.spec.weight_dim();
  std::vector<float> data;
  data.reserve(layer.spec.out_maps * dim);
  for (const BinaryBasis& b : layer.bases)
    for (double v : b.reconstruct()) data.push_back(static_cast<float>(v));
  return Tensor(layer.spec.weight_shape(), std::move(data));
}

void check_conv_input(const Tensor& input, const LayerSpec& spec) {
  if (spec.kind != LayerKind::Conv) throw Error(ErrorCode::ShapeMismatch, "not a conv layer");
  if (input.rank() != 3 || input.extent(0) != spec.in_maps)
    throw Error(ErrorCode::ShapeMismatch, "conv input must be " + std::to_string(spec.in_maps) +
                                              " x h x w");
}

}  // namespace

NetworkModel DecomposedModel::reconstructed() const {
  NetworkModel m;
  m.shape = shape;
  for (const DecomposedLayer& l : layers) {
    LayerParams p;
    if (l.spec.has_weights()) {
      p.weights = l.is_decomposed() ? reconstruct_weights(l) : l.exact_weights;
      p.bias = l.bias;
    }
    m.params.push_back(std::move(p));
  }
  return m;
}

void validate_decomposed(const DecomposedModel& model) {
  validate_shape(model.shape);
  if (model.layers.size() != model.shape.layers.size())
    throw Error(ErrorCode::ShapeMismatch, "layer list does not match the shape description");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const DecomposedLayer& l = model.layers[i];
    if (!(l.spec == model.shape.layers[i]))
      throw Error(ErrorCode::ShapeMismatch, layer_str(i) + ": spec differs from shape description");
    if (!l.spec.has_weights()) continue;
    if (l.bias.shape() != Shape{l.spec.out_maps})
      throw Error(ErrorCode::ShapeMismatch, layer_str(i) + ": bias length");
    if (!l.is_decomposed()) {
      if (l.exact_weights.shape() != l.spec.weight_shape())
        throw Error(ErrorCode::ShapeMismatch, layer_str(i) + ": exact weight shape");
      continue;
    }
    if (l.bases.size() != l.spec.out_maps)
      throw Error(ErrorCode::ShapeMismatch, layer_str(i) + ": expected " +
                                                std::to_string(l.spec.out_maps) + " bases, got " +
                                                std::to_string(l.bases.size()));
    for (const BinaryBasis& b : l.bases)
      if (b.dim() != l.spec.weight_dim())
        throw Error(ErrorCode::ShapeMismatch, layer_str(i) + ": basis dim " +
                                                  std::to_string(b.dim()) + " != " +
                                                  std::to_string(l.spec.weight_dim()));
  }
}

std::size_t first_weighted_layer(const ModelShape& shape) {
  for (std::size_t i = 0; i < shape.layers.size(); ++i)
    if (shape.layers[i].has_weights()) return i;
  throw Error(ErrorCode::ShapeMismatch, "model has no conv/fc layer");
}

DecomposedModel decompose_model(const NetworkModel& model, const DecomposeConfig& cfg,
                                const DecomposeOptions& opts,
                                std::vector<LayerResidual>* residuals) {
  validate_model(model);
  cfg.validate();
  DecomposedModel out;
  out.shape = model.shape;
  out.rank = cfg.rank;
  out.source_name = model.name();
  const std::size_t first = first_weighted_layer(model.shape);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const LayerSpec& spec = model.shape.layers[i];
    DecomposedLayer layer;
    layer.spec = spec;
    if (spec.has_weights()) {
      const LayerParams& p = model.params[i];
      layer.bias = p.bias;
      if (opts.keep_exact_first && i == first) {
        layer.exact_weights = p.weights;
      } else {
        LayerDecomposition dec = spec.kind == LayerKind::Conv
                                     ? decompose_conv_layer(p.weights, cfg, i, opts.threads)
                                     : decompose_fc_layer(p.weights, cfg, i, opts.threads);
        layer.bases = std::move(dec.bases);
        if (residuals) {
          double norm = 0.0;
          for (float v : p.weights.data()) norm += static_cast<double>(v) * v;
          residuals->push_back({i, std::move(dec.costs), norm});
        }
      }
    }
    out.layers.push_back(std::move(layer));
  }
  return out;
}

void keep_layer_exact(DecomposedModel& model, const NetworkModel& source, std::size_t layer) {
  if (layer >= model.layers.size() || layer >= source.params.size())
    throw Error(ErrorCode::ShapeMismatch, layer_str(layer) + " out of range");
  DecomposedLayer& l = model.layers[layer];
  if (!l.spec.has_weights() || !(source.shape.layers[layer] == l.spec))
    throw Error(ErrorCode::ShapeMismatch, layer_str(layer) + ": source layer differs");
  l.exact_weights = source.params[layer].weights;
  l.bias = source.params[layer].bias;
  l.bases.clear();
}

PatchMatrix im2col(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (input.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "im2col expects maps x h x w");
  const std::size_t maps = input.extent(0), h = input.extent(1), w = input.extent(2);
  PatchMatrix pm;
  pm.kernel = kernel;
  pm.stride = stride;
  pm.pad = pad;
  pm.out_h = conv_output_extent(h, kernel, stride, pad);
  pm.out_w = conv_output_extent(w, kernel, stride, pad);
  pm.dim = maps * kernel * kernel;
  pm.values.assign(pm.positions() * pm.dim, 0.0F);
  const auto x = input.data();
  for (std::size_t oy = 0; oy < pm.out_h; ++oy) {
    for (std::size_t ox = 0; ox < pm.out_w; ++ox) {
      float* col = pm.values.data() + (oy * pm.out_w + ox) * pm.dim;
      for (std::size_t c = 0; c < maps; ++c) {
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          for (std::size_t kx = 0; kx < kernel; ++kx, ++col) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            *col = x[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
  return pm;
}

BitplanePatches quantize_patches(const Tensor& input, std::size_t kernel, std::size_t stride,
                                 std::size_t pad, int bits, int threads) {
  if (input.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "expected maps x h x w input");
  if (input.size() == 0) throw Error(ErrorCode::EmptyInput, "empty activation tensor");
  if (bits < 1 || bits > kMaxBitDepth)
    throw Error(ErrorCode::BadBitDepth, "bit depth " + std::to_string(bits));

  const auto x = input.data();
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  double lo = *lo_it, hi = *hi_it;
  if (pad > 0) {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
  }
  const double step = (hi - lo) / (std::ldexp(1.0, bits) - 1.0);

  std::vector<std::uint32_t> levels(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) levels[i] = quantize_level(x[i], lo, step, bits);

  kernels::PatchGeometry g;
  g.channels = input.extent(0);
  g.height = input.extent(1);
  g.width = input.extent(2);
  g.kernel = kernel;
  g.stride = stride;
  g.pad = pad;
  g.out_h = conv_output_extent(g.height, kernel, stride, pad);
  g.out_w = conv_output_extent(g.width, kernel, stride, pad);

  BitplanePatches patches;
  patches.dim = g.channels * kernel * kernel;
  patches.positions = g.out_h * g.out_w;
  patches.words_per_plane = words_for(patches.dim);
  patches.bits = bits;
  patches.x_min = lo;
  patches.step = step;
  patches.significance = significance_vector(step, bits);
  const auto planes = static_cast<std::size_t>(bits);
  patches.words.assign(patches.positions * planes * patches.words_per_plane, 0);
  patches.pops.assign(patches.positions * planes, 0);

  const std::uint32_t pad_level = quantize_level(0.0, lo, step, bits);
  if (threads > 1)
    kernels::pack_patches_omp(levels, g, pad_level, patches, threads);
  else
    kernels::pack_patches_serial(levels, g, pad_level, patches);
  return patches;
}

Tensor conv_forward_exact(const Tensor& input, const Tensor& weights, const Tensor& bias,
                          const LayerSpec& spec, int threads) {
  check_conv_input(input, spec);
  if (weights.shape() != spec.weight_shape() || bias.size() != spec.out_maps)
    throw Error(ErrorCode::ShapeMismatch, "conv weights/bias do not match the layer");
  const PatchMatrix pm = im2col(input, spec.kernel, spec.stride, spec.pad);
  Tensor out({spec.out_maps, pm.out_h, pm.out_w});
  if (threads > 1)
    kernels::dense_layer_omp(weights.data(), spec.out_maps, pm.dim, pm.values, pm.positions(),
                             bias.data(), out.data(), threads);
  else
    kernels::dense_layer_serial(weights.data(), spec.out_maps, pm.dim, pm.values,
                                pm.positions(), bias.data(), out.data());
  return out;
}

Tensor conv_forward_approx(const Tensor& input, std::span<const BinaryBasis> bases,
                           const Tensor& bias, const LayerSpec& spec, int bits, int threads) {
  check_conv_input(input, spec);
  if (bases.size() != spec.out_maps || bias.size() != spec.out_maps)
    throw Error(ErrorCode::ShapeMismatch, "decomposed conv layer does not match its spec");
  const BitplanePatches patches = quantize_patches(input, spec.kernel, spec.stride, spec.pad, bits, threads);
  Tensor out({spec.out_maps, conv_output_extent(input.extent(1), spec.kernel, spec.stride, spec.pad),
              conv_output_extent(input.extent(2), spec.kernel, spec.stride, spec.pad)});
  if (threads > 1)
    kernels::binary_layer_omp(bases, patches, bias.data(), out.data(), threads);
  else
    kernels::binary_layer_serial(bases, patches, bias.data(), out.data());
  return out;
}

Tensor fc_forward_exact(const Tensor& x, const Tensor& weights, const Tensor& bias, int threads) {
  if (weights.rank() != 2 || weights.extent(1) != x.size() || bias.size() != weights.extent(0))
    throw Error(ErrorCode::ShapeMismatch, "fc weights " + std::to_string(weights.size()) +
                                              " do not match input of length " +
                                              std::to_string(x.size()));
  const std::size_t units = weights.extent(0);
  Tensor out({units});
  if (threads > 1)
    kernels::dense_layer_omp(weights.data(), units, x.size(), x.data(), 1, bias.data(), out.data(), threads);
  else
    kernels::dense_layer_serial(weights.data(), units, x.size(), x.data(), 1, bias.data(), out.data());
  return out;
}

Tensor fc_forward_approx(const Tensor& x, std::span<const BinaryBasis> bases, const Tensor& bias,
                         int bits, int threads) {
  if (bases.size() != bias.size())
    throw Error(ErrorCode::ShapeMismatch, "basis count differs from bias length");
  const BitplanePatches patches = BitplanePatches::from_map(quantize(x.data(), bits));
  Tensor out({bases.size()});
  if (threads > 1)
    kernels::binary_layer_omp(bases, patches, bias.data(), out.data(), threads);
  else
    kernels::binary_layer_serial(bases, patches, bias.data(), out.data());
  return out;
}

Tensor relu(const Tensor& x) {
  std::vector<float> v(x.values());
  for (float& e : v) e = std::max(e, 0.0F);
  return Tensor(x.shape(), std::move(v));
}

Tensor maxpool(const Tensor& x, std::size_t window, std::size_t stride) {
  if (x.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "maxpool expects maps x h x w");
  const std::size_t maps = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t oh = conv_output_extent(h, window, stride, 0);
  const std::size_t ow = conv_output_extent(w, window, stride, 0);
  Tensor out({maps, oh, ow});
  const auto in = x.data();
  auto o = out.data();
  for (std::size_t c = 0; c < maps; ++c)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        float m = -std::numeric_limits<float>::infinity();
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx)
            m = std::max(m, in[(c * h + oy * stride + ky) * w + ox * stride + kx]);
        o[(c * oh + oy) * ow + ox] = m;
      }
  return out;
}

namespace {

Tensor run_plain(const LayerSpec& spec, const Tensor& x) {
  if (spec.kind == LayerKind::Relu) return relu(x);
  return maxpool(x, spec.kernel, spec.stride);
}

Tensor run_exact(const LayerSpec& spec, const Tensor& x, const Tensor& w, const Tensor& b,
                 int threads) {
  if (spec.kind == LayerKind::Conv) return conv_forward_exact(x, w, b, spec, threads);
  return fc_forward_exact(x, w, b, threads);
}

}  // namespace

namespace {

Tensor forward_impl(const NetworkModel& model, const Tensor& input, int threads,
                    std::vector<Tensor>* trace) {
  if (input.size() != shape_product(model.shape.input))
    throw Error(ErrorCode::ShapeMismatch, "input does not match the model input shape");
  Tensor x = input.reshaped(model.shape.input);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const LayerSpec& spec = model.shape.layers[i];
    x = spec.has_weights() ? run_exact(spec, x, model.params[i].weights, model.params[i].bias, threads)
                           : run_plain(spec, x);
    if (trace) trace->push_back(x);
  }
  return x;
}

Tensor forward_impl(const DecomposedModel& model, const Tensor& input, const ForwardOptions& opts,
                    std::vector<Tensor>* trace) {
  if (input.size() != shape_product(model.shape.input))
    throw Error(ErrorCode::ShapeMismatch, "input does not match the model input shape");
  Tensor x = input.reshaped(model.shape.input);
  for (const DecomposedLayer& layer : model.layers) {
    const LayerSpec& spec = layer.spec;
    if (!spec.has_weights()) {
      x = run_plain(spec, x);
    } else if (!layer.is_decomposed()) {
      x = run_exact(spec, x, layer.exact_weights, layer.bias, opts.threads);
    } else if (opts.mode == Mode::Exact) {
      x = run_exact(spec, x, reconstruct_weights(layer), layer.bias, opts.threads);
    } else if (spec.kind == LayerKind::Conv) {
      x = conv_forward_approx(x, layer.bases, layer.bias, spec, opts.bits, opts.threads);
    } else {
      x = fc_forward_approx(x, layer.bases, layer.bias, opts.bits, opts.threads);
    }
    if (trace) trace->push_back(x);
  }
  return x;
}

}  // namespace

std::vector<Tensor> forward_layers(const NetworkModel& model, const Tensor& input, int threads) {
  std::vector<Tensor> acts;
  forward_impl(model, input, threads, &acts);
  return acts;
}

std::vector<Tensor> forward_layers(const DecomposedModel& model, const Tensor& input,
                                   const ForwardOptions& opts) {
  std::vector<Tensor> acts;
  forward_impl(model, input, opts, &acts);
  return acts;
}

Tensor forward(const NetworkModel& model, const Tensor& input, int threads) {
  return forward_impl(model, input, threads, nullptr);
}

Tensor forward(const DecomposedModel& model, const Tensor& input, const ForwardOptions& opts) {
  return forward_impl(model, input, opts, nullptr);
}

}  // namespace bdnn
