#include "bdnn/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <omp.h>

#include "bdnn/error.hpp"
#include "bdnn/rng.hpp"

namespace bdnn {

void DecomposeConfig::validate() const {
  if (rank < 1) throw Error(ErrorCode::BadConfig, "rank must be >= 1");
  if (rank > kMaxRank)
    throw Error(ErrorCode::RankTooLarge,
                "rank " + std::to_string(rank) + " exceeds " + std::to_string(kMaxRank));
  if (restarts < 1) throw Error(ErrorCode::BadConfig, "restarts must be >= 1");
  if (max_iters < 1) throw Error(ErrorCode::BadConfig, "max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw Error(ErrorCode::BadConfig, "rel_tol must be > 0");
  if (!(ridge >= 0.0)) throw Error(ErrorCode::BadConfig, "ridge must be >= 0");
}

namespace {

// value[code] = sum_j (+-c_j), the reconstruction of a row with sign code `code`.
std::vector<double> code_values(std::span<const double> coeffs) {
  const std::size_t n = std::size_t{1} << coeffs.size();
  std::vector<double> v(n);
  for (std::size_t code = 0; code < n; ++code) {
    double s = 0.0;
    for (std::size_t j = 0; j < coeffs.size(); ++j) s += ((code >> j) & 1U) ? coeffs[j] : -coeffs[j];
    v[code] = s;
  }
  return v;
}

SignCodes codes_of(const BinaryBasis& basis) {
  SignCodes codes(basis.dim(), 0);
  for (std::size_t j = 0; j < basis.rank(); ++j)
    for (std::size_t d = 0; d < basis.dim(); ++d)
      if (basis.columns()[j].test(d)) codes[d] |= static_cast<std::uint16_t>(1U << j);
  return codes;
}

// In-place Cholesky of the k x k row-major matrix; false if a pivot is not
// safely positive.
bool cholesky(std::vector<double>& a, std::size_t k, double pivot_floor) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * k + j];
      for (std::size_t p = 0; p < j; ++p) s -= a[i * k + p] * a[j * k + p];
      if (i == j) {
        if (!(s > pivot_floor)) return false;
        a[i * k + i] = std::sqrt(s);
      } else {
        a[i * k + j] = s / a[j * k + j];
      }
    }
  }
  return true;
}

std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t k,
                                   std::vector<double> b) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t p = 0; p < i; ++p) b[i] -= l[i * k + p] * b[p];
    b[i] /= l[i * k + i];
  }
  for (std::size_t i = k; i-- > 0;) {
    for (std::size_t p = i + 1; p < k; ++p) b[i] -= l[p * k + i] * b[p];
    b[i] /= l[i * k + i];
  }
  return b;
}

void check_dims(std::size_t w, std::size_t m) {
  if (w != m)
    throw Error(ErrorCode::DimensionMismatch,
                "weight length " + std::to_string(w) + " vs basis rows " + std::to_string(m));
}

}  // namespace

double cost(std::span<const double> w, std::span<const std::uint16_t> codes,
            std::span<const double> coeffs) {
  check_dims(w.size(), codes.size());
  const std::vector<double> v = code_values(coeffs);
  double e = 0.0;
  for (std::size_t d = 0; d < w.size(); ++d) {
    const double r = w[d] - v[codes[d]];
    e += r * r;
  }
  return e;
}

double cost(std::span<const double> w, const BinaryBasis& basis) {
  check_dims(w.size(), basis.dim());
  return cost(w, codes_of(basis), basis.coeffs());
}

std::vector<double> least_squares_coeffs(std::span<const std::uint16_t> codes, std::size_t rank,
                                         std::span<const double> w, double ridge) {
  check_dims(w.size(), codes.size());
  if (rank < 1 || rank > kMaxRank)
    throw Error(ErrorCode::RankTooLarge, "rank " + std::to_string(rank) + " out of range");
  const std::size_t dim = codes.size();

  // G = M^T M from packed columns: G_ij = D - 2 * popcount(col_i ^ col_j).
  const BinaryBasis packed = BinaryBasis::from_codes(codes, rank, std::vector<double>(rank, 0.0));
  const std::size_t words = packed.words_per_column();
  std::vector<double> gram(rank * rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const auto ci = packed.columns()[i].words();
    for (std::size_t j = 0; j <= i; ++j) {
      const auto cj = packed.columns()[j].words();
      std::int64_t diff = 0;
      for (std::size_t p = 0; p < words; ++p) diff += popcount64(ci[p] ^ cj[p]);
      const double g = static_cast<double>(static_cast<std::int64_t>(dim) - 2 * diff);
      gram[i * rank + j] = g;
      gram[j * rank + i] = g;
    }
  }

  // M^T w = 2 * sum_{d : M_dj = +1} w_d - sum_d w_d
  double total = 0.0;
  std::vector<double> plus(rank, 0.0);
  for (std::size_t d = 0; d < dim; ++d) {
    total += w[d];
    for (std::size_t j = 0; j < rank; ++j)
      if ((codes[d] >> j) & 1U) plus[j] += w[d];
  }
  std::vector<double> rhs(rank);
  for (std::size_t j = 0; j < rank; ++j) rhs[j] = 2.0 * plus[j] - total;

  const double pivot_floor = 1e-10 * static_cast<double>(dim);
  std::vector<double> l = gram;
  if (cholesky(l, rank, pivot_floor)) return cholesky_solve(l, rank, rhs);

  if (ridge <= 0.0)
    throw Error(ErrorCode::SingularSystem, "M^T M is singular and ridge is 0");
  l = gram;
  for (std::size_t i = 0; i < rank; ++i) l[i * rank + i] += ridge;
  if (!cholesky(l, rank, 0.0))
    throw Error(ErrorCode::SingularSystem, "M^T M + ridge*I is not positive definite");
  return cholesky_solve(l, rank, rhs);
}

std::vector<double> least_squares_coeffs(const BinaryBasis& basis, std::span<const double> w,
                                         double ridge) {
  check_dims(w.size(), basis.dim());
  return least_squares_coeffs(codes_of(basis), basis.rank(), w, ridge);
}

SignCodes exhaustive_update_basis(std::span<const double> w, std::span<const double> coeffs) {
  if (coeffs.empty()) throw Error(ErrorCode::BadConfig, "rank must be >= 1");
  if (coeffs.size() > kMaxRank)
    throw Error(ErrorCode::RankTooLarge, "exhaustive search limited to rank " + std::to_string(kMaxRank));

  // Rows are independent given c, so each one takes the nearest of the 2^k
  // candidate values. Candidates are sorted once and searched per row; ties in
  // |w_d - v| are resolved to the smallest code, matching in-order enumeration.
  const std::vector<double> values = code_values(coeffs);
  struct Candidate {
    double value;
    std::uint16_t code;
  };
  std::vector<Candidate> sorted(values.size());
  for (std::size_t c = 0; c < values.size(); ++c)
    sorted[c] = {values[c], static_cast<std::uint16_t>(c)};
  std::sort(sorted.begin(), sorted.end(), [](const Candidate& a, const Candidate& b) {
    return a.value < b.value || (a.value == b.value && a.code < b.code);
  });

  SignCodes codes(w.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(sorted.size());
  for (std::size_t d = 0; d < w.size(); ++d) {
    const double x = w[d];
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), x,
                                     [](const Candidate& c, double v) { return c.value < v; });
    const std::ptrdiff_t hi = it - sorted.begin();
    double best = std::numeric_limits<double>::infinity();
    if (hi < n) best = std::abs(x - sorted[static_cast<std::size_t>(hi)].value);
    if (hi > 0) best = std::min(best, std::abs(x - sorted[static_cast<std::size_t>(hi - 1)].value));

    std::uint16_t code = std::numeric_limits<std::uint16_t>::max();
    for (std::ptrdiff_t i = hi; i < n && std::abs(x - sorted[static_cast<std::size_t>(i)].value) == best; ++i)
      code = std::min(code, sorted[static_cast<std::size_t>(i)].code);
    for (std::ptrdiff_t i = hi - 1; i >= 0 && std::abs(x - sorted[static_cast<std::size_t>(i)].value) == best; --i)
      code = std::min(code, sorted[static_cast<std::size_t>(i)].code);
    codes[d] = code;
  }
  return codes;
}

DecomposeResult decompose_vector(std::span<const double> w, const DecomposeConfig& cfg,
                                 DecomposeTrace* trace) {
  cfg.validate();
  if (w.empty()) throw Error(ErrorCode::EmptyInput, "cannot decompose an empty vector");
  if (!std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); }))
    throw Error(ErrorCode::NonFiniteWeight, "weight vector holds NaN or Inf");
  const std::size_t rank = cfg.rank;
  const auto mask = static_cast<std::uint16_t>((1U << rank) - 1U);

  double best_cost = std::numeric_limits<double>::infinity();
  SignCodes best_codes;
  std::vector<double> best_coeffs;
  std::size_t best_restart = 0;
  if (trace) trace->restarts.assign(cfg.restarts, {});

  SignCodes codes(w.size());
  for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
    CounterRng rng(derive_seed(cfg.seed, {restart}));
    for (auto& c : codes) c = static_cast<std::uint16_t>(rng() & mask);

    std::vector<double> coeffs;
    double prev = std::numeric_limits<double>::infinity();
    double current = prev;
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
      coeffs = least_squares_coeffs(codes, rank, w, cfg.ridge);
      if (trace) trace->restarts[restart].push_back(cost(w, codes, coeffs));
      codes = exhaustive_update_basis(w, coeffs);
      current = cost(w, codes, coeffs);
      if (trace) trace->restarts[restart].push_back(current);
      if (current == 0.0) break;
      if (it > 0 && prev - current <= cfg.rel_tol * std::max(prev, 1e-12)) break;
      prev = current;
    }
    if (current < best_cost) {
      best_cost = current;
      best_codes = codes;
      best_coeffs = coeffs;
      best_restart = restart;
    }
  }
  return {BinaryBasis::from_codes(best_codes, rank, std::move(best_coeffs)), best_cost, best_restart};
}

namespace {

LayerDecomposition decompose_rows(const Tensor& weights, std::size_t rows, std::size_t dim,
                                  const DecomposeConfig& cfg, std::size_t layer_index,
                                  int threads) {
  cfg.validate();
  if (rows == 0 || dim == 0 || weights.size() != rows * dim)
    throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(layer_index) +
                                              ": weight tensor does not match N x D");
  LayerDecomposition out;
  out.bases.resize(rows);
  out.costs.resize(rows);
  const auto data = weights.data();
  const auto n_rows = static_cast<std::ptrdiff_t>(rows);

  // Errors thrown inside the parallel region are rethrown after it.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(threads, 1)) if (threads > 1)
  for (std::ptrdiff_t n = 0; n < n_rows; ++n) {
    try {
      const auto row = data.subspan(static_cast<std::size_t>(n) * dim, dim);
      const std::vector<double> w(row.begin(), row.end());
      DecomposeConfig local = cfg;
      local.seed = derive_seed(cfg.seed, {layer_index, static_cast<std::uint64_t>(n)});
      DecomposeResult r = decompose_vector(w, local);
      out.bases[static_cast<std::size_t>(n)] = std::move(r.basis);
      out.costs[static_cast<std::size_t>(n)] = r.cost;
    } catch (...) {
#pragma omp critical(bdnn_decompose_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

LayerDecomposition decompose_conv_layer(const Tensor& weights, const DecomposeConfig& cfg,
                                        std::size_t layer_index, int threads) {
  if (weights.rank() != 4 || weights.extent(2) != weights.extent(3))
    throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(layer_index) +
                                              ": conv weights must be N x M x H x H");
  // Row-major N x M x H x H already lays each filter out channel-major, then
  // row-major spatial, which is the im2col order.
  const std::size_t dim = weights.extent(1) * weights.extent(2) * weights.extent(3);
  return decompose_rows(weights, weights.extent(0), dim, cfg, layer_index, threads);
}

LayerDecomposition decompose_fc_layer(const Tensor& weights, const DecomposeConfig& cfg,
                                      std::size_t layer_index, int threads) {
  if (weights.rank() != 2)
    throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(layer_index) +
                                              ": fc weights must be N x M");
  return decompose_rows(weights, weights.extent(0), weights.extent(1), cfg, layer_index, threads);
}

}  // namespace bdnn
