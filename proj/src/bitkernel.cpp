#include "bdnn/bitkernel.hpp"

#include <string>

#include "bdnn/error.hpp"

namespace bdnn {

// ---- PackedBits ----

PackedBits::PackedBits(std::size_t nbits, std::vector<std::uint64_t> words)
    : nbits_(nbits), words_(std::move(words)) {
  if (words_.size() != words_for(nbits_))
    throw Error(ErrorCode::LengthMismatch, std::to_string(nbits_) + " bits need " +
                                               std::to_string(words_for(nbits_)) + " words, got " +
                                               std::to_string(words_.size()));
  const std::size_t tail = nbits_ % kWordBits;
  if (tail != 0 && (words_.back() >> tail) != 0)
    throw Error(ErrorCode::CorruptManifest, "padding bits set past bit " + std::to_string(nbits_));
  for (std::uint64_t w : words_) pop_ += popcount64(w);
}

void PackedBits::set(std::size_t i, bool value) {
  if (i >= nbits_) throw Error(ErrorCode::LengthMismatch, "bit index out of range");
  std::uint64_t& w = words_[i / kWordBits];
  const std::uint64_t mask = std::uint64_t{1} << (i % kWordBits);
  const bool was = (w & mask) != 0;
  if (was == value) return;
  w ^= mask;
  pop_ += value ? 1 : -1;
}

PackedBits pack_bits(std::span<const std::uint8_t> bits) {
  std::vector<std::uint64_t> words(words_for(bits.size()), 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) words[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
  return PackedBits(bits.size(), std::move(words));
}

// ---- BinaryBasis ----

BinaryBasis::BinaryBasis(std::vector<PackedBits> columns, std::vector<double> coeffs)
    : columns_(std::move(columns)), coeffs_(std::move(coeffs)) {
  if (columns_.empty()) throw Error(ErrorCode::BadConfig, "basis rank must be >= 1");
  if (columns_.size() > kMaxRank)
    throw Error(ErrorCode::RankTooLarge, "basis rank " + std::to_string(columns_.size()) +
                                             " exceeds " + std::to_string(kMaxRank));
  if (columns_.size() != coeffs_.size())
    throw Error(ErrorCode::DimensionMismatch, "basis has " + std::to_string(columns_.size()) +
                                                  " columns but " +
                                                  std::to_string(coeffs_.size()) + " coefficients");
  dim_ = columns_.front().nbits();
  if (dim_ == 0) throw Error(ErrorCode::BadConfig, "basis dimension must be >= 1");
  colsum_.reserve(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].nbits() != dim_)
      throw Error(ErrorCode::DimensionMismatch, "basis columns differ in length");
    colsum_.push_back(2 * columns_[j].pop() - static_cast<std::int64_t>(dim_));
    offset_weight_ += coeffs_[j] * static_cast<double>(colsum_[j]);
  }
}

BinaryBasis BinaryBasis::from_codes(std::span<const std::uint16_t> codes, std::size_t rank,
                                    std::vector<double> coeffs) {
  std::vector<std::vector<std::uint64_t>> words(rank, std::vector<std::uint64_t>(words_for(codes.size()), 0));
  for (std::size_t d = 0; d < codes.size(); ++d)
    for (std::size_t j = 0; j < rank; ++j)
      if ((codes[d] >> j) & 1U) words[j][d / kWordBits] |= std::uint64_t{1} << (d % kWordBits);
  std::vector<PackedBits> columns;
  columns.reserve(rank);
  for (auto& w : words) columns.emplace_back(codes.size(), std::move(w));
  return BinaryBasis(std::move(columns), std::move(coeffs));
}

std::vector<double> BinaryBasis::reconstruct() const {
  std::vector<double> w(dim_, 0.0);
  for (std::size_t j = 0; j < columns_.size(); ++j)
    for (std::size_t d = 0; d < dim_; ++d) w[d] += sign(d, j) * coeffs_[j];
  return w;
}

// ---- kernels ----

std::int64_t binary_dot(const PackedBits& m, const PackedBits& b) {
  if (m.nbits() != b.nbits())
    throw Error(ErrorCode::LengthMismatch, std::to_string(m.nbits()) + " vs " +
                                               std::to_string(b.nbits()) + " bits");
  return binary_dot_words(m.words().data(), b.words().data(), m.word_count(), b.pop());
}

double approx_dot(const BinaryBasis& basis, PlaneView planes, std::span<const double> significance,
                  double x_min, double offset_scale) {
  const std::size_t words = planes.words_per_plane;
  const auto bits = static_cast<std::size_t>(planes.bits);
  const auto& cols = basis.columns();
  const auto coeffs = basis.coeffs();

  // k x Q integer table, kept small enough for the stack.
  std::int64_t table[kMaxRank][kMaxBitDepth];
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const std::uint64_t* m = cols[j].words().data();
    for (std::size_t q = 0; q < bits; ++q)
      table[j][q] = binary_dot_words(m, planes.words + q * words, words, planes.pops[q]);
  }

  double acc = 0.0;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    double t = 0.0;
    for (std::size_t q = 0; q < bits; ++q) t += significance[q] * static_cast<double>(table[j][q]);
    acc += coeffs[j] * t;
  }
  return acc + offset_scale * basis.offset_weight() * x_min;
}

double approx_dot(const BinaryBasis& basis, const QuantizedMap& q, double offset_scale) {
  if (basis.dim() != q.dim)
    throw Error(ErrorCode::DimensionMismatch, "basis dim " + std::to_string(basis.dim()) +
                                                  " vs activation dim " + std::to_string(q.dim));
  const BitplanePatches p = BitplanePatches::from_map(q);
  return approx_dot(basis, p.view(0), p.significance, p.x_min, offset_scale);
}

QuantizedMap BitplanePatches::column(std::size_t position) const {
  QuantizedMap q;
  q.dim = dim;
  q.bits = bits;
  q.significance = significance;
  q.x_min = x_min;
  q.step = step;
  const PlaneView v = view(position);
  for (int b = 0; b < bits; ++b) {
    const std::uint64_t* w = v.words + static_cast<std::size_t>(b) * words_per_plane;
    q.planes.emplace_back(dim, std::vector<std::uint64_t>(w, w + words_per_plane));
  }
  return q;
}

BitplanePatches BitplanePatches::from_map(const QuantizedMap& q) {
  BitplanePatches p;
  p.dim = q.dim;
  p.positions = 1;
  p.words_per_plane = words_for(q.dim);
  p.bits = q.bits;
  p.significance = q.significance;
  p.x_min = q.x_min;
  p.step = q.step;
  p.words.reserve(p.words_per_plane * static_cast<std::size_t>(q.bits));
  for (const PackedBits& plane : q.planes) {
    p.words.insert(p.words.end(), plane.words().begin(), plane.words().end());
    p.pops.push_back(plane.pop());
  }
  return p;
}

}  // namespace bdnn
