#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bdnn/binary_basis.hpp"
#include "bdnn/tensor.hpp"

namespace bdnn {

struct DecomposeConfig {
  std::size_t rank = 6;
  std::size_t restarts = 8;
  std::size_t max_iters = 50;
  double rel_tol = 1e-10;
  std::uint64_t seed = 0;
  double ridge = 1e-8;

  void validate() const;  // BadConfig / RankTooLarge
};

/// Sign matrix as one code per row: bit j set <=> M[d][j] = +1.
using SignCodes = std::vector<std::uint16_t>;

/// ||w - M c||^2.
double cost(std::span<const double> w, const BinaryBasis& basis);
double cost(std::span<const double> w, std::span<const std::uint16_t> codes,
            std::span<const double> coeffs);

/// Normal-equation solve of min_c ||w - M c||^2. ridge * I is added only when
/// M^T M is numerically singular; with ridge == 0 that case throws.
std::vector<double> least_squares_coeffs(std::span<const std::uint16_t> codes, std::size_t rank,
                                         std::span<const double> w, double ridge);
std::vector<double> least_squares_coeffs(const BinaryBasis& basis, std::span<const double> w,
                                         double ridge);

/// Row-wise optimal signs for fixed coefficients; on ties the smallest code wins.
SignCodes exhaustive_update_basis(std::span<const double> w, std::span<const double> coeffs);

/// Per-restart cost sequence: [initial LS, after update, after LS, after update, ...].
struct DecomposeTrace {
  std::vector<std::vector<double>> restarts;
};

struct DecomposeResult {
  BinaryBasis basis;
  double cost = 0.0;
  std::size_t best_restart = 0;
};

DecomposeResult decompose_vector(std::span<const double> w, const DecomposeConfig& cfg,
                                 DecomposeTrace* trace = nullptr);

struct LayerDecomposition {
  std::vector<BinaryBasis> bases;
  std::vector<double> costs;  // per filter/unit
};

/// Per-filter seeds are derived from (cfg.seed, layer_index, filter), so the
/// result does not depend on the thread count.
LayerDecomposition decompose_conv_layer(const Tensor& weights, const DecomposeConfig& cfg,
                                        std::size_t layer_index = 0, int threads = 1);
LayerDecomposition decompose_fc_layer(const Tensor& weights, const DecomposeConfig& cfg,
                                      std::size_t layer_index = 0, int threads = 1);

}  // namespace bdnn
