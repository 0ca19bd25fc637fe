#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bdnn {

inline constexpr std::size_t kWordBits = 64;

constexpr std::size_t words_for(std::size_t nbits) noexcept {
  return (nbits + kWordBits - 1) / kWordBits;
}

// Hardware popcount when compiled with -mpopcnt, the compiler's builtin otherwise.
inline int popcount64(std::uint64_t w) noexcept { return std::popcount(w); }

// Portable SWAR popcount; must agree bit-for-bit with popcount64.
constexpr int popcount64_swar(std::uint64_t w) noexcept {
  w = w - ((w >> 1) & 0x5555555555555555ULL);
  w = (w & 0x3333333333333333ULL) + ((w >> 2) & 0x3333333333333333ULL);
  w = (w + (w >> 4)) & 0x0F0F0F0F0F0F0F0FULL;
  return static_cast<int>((w * 0x0101010101010101ULL) >> 56);
}

/// Bit vector packed LSB-first into 64-bit words. Bits past nbits are zero.
class PackedBits {
 public:
  PackedBits() = default;
  explicit PackedBits(std::size_t nbits) : nbits_(nbits), words_(words_for(nbits), 0) {}

  /// Adopts words; throws LengthMismatch on wrong word count and
  /// CorruptManifest when padding bits are set.
  PackedBits(std::size_t nbits, std::vector<std::uint64_t> words);

  std::size_t nbits() const noexcept { return nbits_; }
  std::size_t word_count() const noexcept { return words_.size(); }
  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::int64_t pop() const noexcept { return pop_; }

  bool test(std::size_t i) const noexcept { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }
  void set(std::size_t i, bool value);

  friend bool operator==(const PackedBits&, const PackedBits&) = default;

 private:
  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
  std::int64_t pop_ = 0;
};

PackedBits pack_bits(std::span<const std::uint8_t> bits);

}  // namespace bdnn
