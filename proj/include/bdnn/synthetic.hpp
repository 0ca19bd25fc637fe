#pragma once

#include <cstddef>
#include <cstdint>

#include "bdnn/model.hpp"
#include "bdnn/tensor.hpp"

namespace bdnn {

enum class SyntheticMode {
  Gaussian,              // He-scaled normal weights
  ExactlyDecomposable,   // every filter/unit is exactly M c for a random binary M
};

struct SyntheticOptions {
  SyntheticMode mode = SyntheticMode::Gaussian;
  std::size_t rank = 2;  // ExactlyDecomposable only
  std::uint64_t seed = 0;
  float bias_scale = 0.01F;
};

NetworkModel generate_synthetic(const ModelShape& shape, const SyntheticOptions& opts);

/// Gaussian activation tensor, deterministic in seed.
Tensor random_tensor(const Shape& shape, std::uint64_t seed, double stddev = 1.0);

}  // namespace bdnn
