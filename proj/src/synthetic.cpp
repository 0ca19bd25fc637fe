#include "bdnn/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "bdnn/error.hpp"
#include "bdnn/rng.hpp"

namespace bdnn {

namespace {

// Box-Muller on the counter generator, so values do not depend on the
// standard library's distribution implementation.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t key) : rng_(key) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = rng_.uniform();
    while (u1 <= 0.0) u1 = rng_.uniform();
    const double u2 = rng_.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  CounterRng rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Tensor gaussian_tensor(const Shape& shape, std::uint64_t key, double stddev) {
  Gaussian g(key);
  std::vector<float> v(shape_product(shape));
  for (float& e : v) e = static_cast<float>(stddev * g());
  return Tensor(shape, std::move(v));
}

// w = s * M c with c_j = m_j / 16, m_j in [10, 16], and s a power of two near
// the He scale: every weight is exactly representable in float. Keeping the
// coefficients within a factor of two of each other avoids the sign patterns
// where alternating minimization stalls.
Tensor decomposable_weights(const LayerSpec& spec, std::size_t layer, std::size_t rank,
                            std::uint64_t seed) {
  if (rank < 1 || rank > 16) throw Error(ErrorCode::BadConfig, "synthetic rank must be in [1, 16]");
  const std::size_t dim = spec.weight_dim();
  const double he = std::sqrt(2.0 / static_cast<double>(dim * rank));
  const double scale = std::ldexp(1.0, static_cast<int>(std::lround(std::log2(he))));
  std::vector<float> data;
  data.reserve(spec.out_maps * dim);
  for (std::size_t n = 0; n < spec.out_maps; ++n) {
    CounterRng rng(derive_seed(seed, {layer, n, 1}));
    std::vector<double> c(rank);
    for (std::size_t j = 0; j < rank; ++j)
      c[j] = static_cast<double>(10 + rng() % 7) / 16.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const std::uint64_t bits = rng();
      double w = 0.0;
      for (std::size_t j = 0; j < rank; ++j) w += ((bits >> j) & 1U) ? c[j] : -c[j];
      data.push_back(static_cast<float>(scale * w));
    }
  }
  return Tensor(spec.weight_shape(), std::move(data));
}

}  // namespace

NetworkModel generate_synthetic(const ModelShape& shape, const SyntheticOptions& opts) {
  validate_shape(shape);
  NetworkModel model;
  model.shape = shape;
  for (std::size_t i = 0; i < shape.layers.size(); ++i) {
    const LayerSpec& spec = shape.layers[i];
    LayerParams p;
    if (spec.has_weights()) {
      const double he = std::sqrt(2.0 / static_cast<double>(spec.weight_dim()));
      p.weights = opts.mode == SyntheticMode::Gaussian
                      ? gaussian_tensor(spec.weight_shape(), derive_seed(opts.seed, {i, 0}), he)
                      : decomposable_weights(spec, i, opts.rank, opts.seed);
      p.bias = gaussian_tensor({spec.out_maps}, derive_seed(opts.seed, {i, 2}), opts.bias_scale);
    }
    model.params.push_back(std::move(p));
  }
  return model;
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double stddev) {
  return gaussian_tensor(shape, derive_seed(seed, {0xAC7}), stddev);
}

}  // namespace bdnn
