#pragma once

// Independent reference computations for tests. Nothing here calls the
// packed kernels or the decomposition solver it is used to check.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "bdnn/binary_basis.hpp"
#include "bdnn/quantizer.hpp"
#include "bdnn/tensor.hpp"

namespace oracle {

// sum_{d : b_d = 1} m_d with m_d in {-1, +1}
inline long long signed_dot(const std::vector<int>& m, const std::vector<int>& b) {
  long long s = 0;
  for (std::size_t d = 0; d < m.size(); ++d)
    if (b[d]) s += m[d];
  return s;
}

inline double residual(const std::vector<double>& w, const std::vector<std::vector<int>>& m,
                       const std::vector<double>& c) {
  double e = 0.0;
  for (std::size_t d = 0; d < w.size(); ++d) {
    double r = w[d];
    for (std::size_t j = 0; j < c.size(); ++j) r -= m[d][j] * c[j];
    e += r * r;
  }
  return e;
}

// min_c ||w - M c||^2 by modified Gram-Schmidt projection (handles rank
// deficiency by dropping dependent columns).
inline double projection_cost(const std::vector<double>& w, const std::vector<std::vector<int>>& m,
                              std::size_t k) {
  const std::size_t dim = w.size();
  std::vector<std::vector<double>> q;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = m[d][j];
    for (const auto& u : q) {
      double p = 0.0;
      for (std::size_t d = 0; d < dim; ++d) p += u[d] * v[d];
      for (std::size_t d = 0; d < dim; ++d) v[d] -= p * u[d];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    if (n < 1e-18) continue;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    q.push_back(std::move(v));
  }
  std::vector<double> r = w;
  for (const auto& u : q) {
    double p = 0.0;
    for (std::size_t d = 0; d < dim; ++d) p += u[d] * r[d];
    for (std::size_t d = 0; d < dim; ++d) r[d] -= p * u[d];
  }
  double e = 0.0;
  for (double x : r) e += x * x;
  return e;
}

// Global optimum of ||w - M c||^2 over all M in {-1,1}^{D x k} (2^(D k) of them).
inline double brute_force_optimum(const std::vector<double>& w, std::size_t k) {
  const std::size_t dim = w.size();
  const std::size_t total_bits = dim * k;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> m(dim, std::vector<int>(k));
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << total_bits); ++code) {
    for (std::size_t d = 0; d < dim; ++d)
      for (std::size_t j = 0; j < k; ++j) m[d][j] = ((code >> (d * k + j)) & 1U) ? 1 : -1;
    best = std::min(best, projection_cost(w, m, k));
  }
  return best;
}

// Brute-force row update: every code 0..2^k-1 in order, first strict minimum.
inline std::vector<std::uint16_t> enumerate_rows(const std::vector<double>& w,
                                                 const std::vector<double>& c) {
  std::vector<std::uint16_t> out(w.size());
  const std::size_t k = c.size();
  for (std::size_t d = 0; d < w.size(); ++d) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t code = 0; code < (std::size_t{1} << k); ++code) {
      double v = 0.0;
      for (std::size_t j = 0; j < k; ++j) v += ((code >> j) & 1U) ? c[j] : -c[j];
      const double e = std::abs(w[d] - v);
      if (e < best) {
        best = e;
        out[d] = static_cast<std::uint16_t>(code);
      }
    }
  }
  return out;
}

// c^T M^T (B r + 1 x_min) on unpacked values.
inline double dense_approx_dot(const bdnn::BinaryBasis& basis, const bdnn::QuantizedMap& q) {
  const std::size_t dim = basis.dim();
  std::vector<double> xhat(dim, q.x_min);
  for (std::size_t d = 0; d < dim; ++d)
    for (int b = 0; b < q.bits; ++b)
      if (q.planes[static_cast<std::size_t>(b)].test(d)) xhat[d] += q.significance[static_cast<std::size_t>(b)];
  double s = 0.0;
  for (std::size_t j = 0; j < basis.rank(); ++j) {
    double t = 0.0;
    for (std::size_t d = 0; d < dim; ++d) t += basis.sign(d, j) * xhat[d];
    s += basis.coeffs()[j] * t;
  }
  return s;
}

// Direct convolution: out[n][oy][ox] = b[n] + sum_{c,ky,kx} w[n][c][ky][kx] * in[c][iy][ix].
inline std::vector<double> conv_nested(const bdnn::Tensor& in, const bdnn::Tensor& w,
                                       const bdnn::Tensor& b, std::size_t stride, std::size_t pad) {
  const std::size_t n_out = w.extent(0), maps = w.extent(1), k = w.extent(2);
  const std::size_t h = in.extent(1), wd = in.extent(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(n_out * oh * ow);
  for (std::size_t n = 0; n < n_out; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double s = b[n];
        for (std::size_t c = 0; c < maps; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
              s += static_cast<double>(w[((n * maps + c) * k + ky) * k + kx]) *
                   in[(c * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix)];
            }
        out[(n * oh + oy) * ow + ox] = s;
      }
  return out;
}

inline std::vector<float> maxpool_nested(const bdnn::Tensor& in, std::size_t win, std::size_t stride) {
  const std::size_t c = in.extent(0), h = in.extent(1), w = in.extent(2);
  const std::size_t oh = (h - win) / stride + 1, ow = (w - win) / stride + 1;
  std::vector<float> out;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        float m = in[(ch * h + y * stride) * w + x * stride];
        for (std::size_t a = 0; a < win; ++a)
          for (std::size_t b = 0; b < win; ++b) m = std::max(m, in[(ch * h + y * stride + a) * w + x * stride + b]);
        out.push_back(m);
      }
  return out;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

inline std::vector<double> as_double(std::span<const float> v) { return {v.begin(), v.end()}; }

inline std::vector<double> gaussian_vector(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Random {-1,+1} matrix as per-row codes and the matching dense matrix.
inline std::vector<std::uint16_t> random_codes(std::size_t dim, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::uint16_t> codes(dim);
  for (auto& c : codes) c = static_cast<std::uint16_t>(rng() & ((1U << k) - 1U));
  return codes;
}

inline std::vector<std::vector<int>> dense_signs(const std::vector<std::uint16_t>& codes, std::size_t k) {
  std::vector<std::vector<int>> m(codes.size(), std::vector<int>(k));
  for (std::size_t d = 0; d < codes.size(); ++d)
    for (std::size_t j = 0; j < k; ++j) m[d][j] = ((codes[d] >> j) & 1U) ? 1 : -1;
  return m;
}

inline std::vector<double> mul(const std::vector<std::vector<int>>& m, const std::vector<double>& c) {
  std::vector<double> w(m.size(), 0.0);
  for (std::size_t d = 0; d < m.size(); ++d)
    for (std::size_t j = 0; j < c.size(); ++j) w[d] += m[d][j] * c[j];
  return w;
}

}  // namespace oracle
