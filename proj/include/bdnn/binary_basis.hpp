#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bdnn/packed_bits.hpp"

namespace bdnn {

inline constexpr std::size_t kMaxRank = 16;

// Approximation w ~= M c with M in {-1,+1}^{D x k}. Column j is stored packed,
// bit set <=> entry +1. colsum[j] = sum_d M[d][j] feeds the offset term.
class BinaryBasis {
 public:
  BinaryBasis() = default;
  BinaryBasis(std::vector<PackedBits> columns, std::vector<double> coeffs);

  /// Builds from per-row sign codes (bit j of codes[d] set <=> M[d][j] = +1).
  static BinaryBasis from_codes(std::span<const std::uint16_t> codes, std::size_t rank,
                                std::vector<double> coeffs);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rank() const noexcept { return columns_.size(); }
  std::size_t words_per_column() const noexcept { return words_for(dim_); }

  const std::vector<PackedBits>& columns() const noexcept { return columns_; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }
  std::span<const std::int64_t> colsum() const noexcept { return colsum_; }

  /// Sum_j c_j * colsum_j, the per-basis constant of the offset term.
  double offset_weight() const noexcept { return offset_weight_; }

  /// M[d][j] as +1/-1.
  int sign(std::size_t d, std::size_t j) const noexcept {
    return columns_[j].test(d) ? 1 : -1;
  }

  /// Dense reconstruction M c.
  std::vector<double> reconstruct() const;

  friend bool operator==(const BinaryBasis&, const BinaryBasis&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<PackedBits> columns_;
  std::vector<double> coeffs_;
  std::vector<std::int64_t> colsum_;
  double offset_weight_ = 0.0;
};

}  // namespace bdnn
