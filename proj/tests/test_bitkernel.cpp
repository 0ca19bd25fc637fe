#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

#include "bdnn/binary_basis.hpp"
#include "bdnn/bitkernel.hpp"
#include "bdnn/packed_bits.hpp"
#include "bdnn/quantizer.hpp"

using namespace bdnn;

namespace {

PackedBits bits_of(const std::vector<int>& v) {
  std::vector<std::uint8_t> b(v.begin(), v.end());
  return pack_bits(b);
}

// m given as +1/-1
PackedBits signs_of(const std::vector<int>& m) {
  std::vector<std::uint8_t> b;
  for (int x : m) b.push_back(x > 0 ? 1 : 0);
  return pack_bits(b);
}

std::vector<int> random_pm(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> v(n);
  for (auto& x : v) x = (rng() & 1U) ? 1 : -1;
  return v;
}

std::vector<int> random_01(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng() & 1U);
  return v;
}

}  // namespace

TEST_CASE("pack_bits layout") {
  const PackedBits a = bits_of({1, 0, 1});
  REQUIRE(a.word_count() == 1);
  CHECK(a.words()[0] == 0b101);
  CHECK(a.pop() == 2);

  std::vector<int> v(65, 0);
  v[64] = 1;
  const PackedBits b = bits_of(v);
  REQUIRE(b.word_count() == 2);
  CHECK(b.words()[0] == 0);
  CHECK(b.words()[1] == 1);

  CHECK(PackedBits(0).word_count() == 0);
}

TEST_CASE("PackedBits validates adopted words") {
  CHECK_ERROR_CODE(PackedBits(3, std::vector<std::uint64_t>{0b1000}), ErrorCode::CorruptManifest);
  CHECK_ERROR_CODE(PackedBits(65, std::vector<std::uint64_t>{1}), ErrorCode::LengthMismatch);
  const PackedBits ok(3, std::vector<std::uint64_t>{0b110});
  CHECK(ok.pop() == 2);

  PackedBits s(70);
  s.set(69, true);
  s.set(0, true);
  s.set(0, true);
  CHECK(s.pop() == 2);
  s.set(69, false);
  CHECK(s.pop() == 1);
}

TEST_CASE("swar popcount agrees with the native one") {
  std::mt19937_64 rng(1);
  CHECK(popcount64_swar(0) == 0);
  CHECK(popcount64_swar(~0ULL) == 64);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t w = rng();
    CHECK(popcount64_swar(w) == popcount64(w));
  }
}

TEST_CASE("binary_dot examples") {
  CHECK(binary_dot(signs_of({1, -1, 1}), bits_of({1, 1, 0})) == 0);
  CHECK(binary_dot(signs_of({1, 1, 1, 1}), bits_of({1, 1, 1, 1})) == 4);
  CHECK(binary_dot(signs_of({-1, -1}), bits_of({1, 1})) == -2);
  CHECK(binary_dot(signs_of({1, -1, 1}), bits_of({0, 0, 0})) == 0);
  CHECK_ERROR_CODE(binary_dot(signs_of({1, 1, 1}), bits_of({1, 1, 1, 1})), ErrorCode::LengthMismatch);
}

TEST_CASE("binary_dot matches the signed sum") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t dim = 1 + rng() % 512;
    const auto m = random_pm(dim, rng);
    const auto b = random_01(dim, rng);
    const PackedBits pb = bits_of(b);
    const std::int64_t got = binary_dot(signs_of(m), pb);
    REQUIRE(got == oracle::signed_dot(m, b));
    CHECK(std::abs(got) <= pb.pop());
    CHECK(((got - pb.pop()) % 2) == 0);
  }
}

TEST_CASE("flipping every sign on the support negates binary_dot") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 1 + rng() % 300;
    auto m = random_pm(dim, rng);
    const auto b = random_01(dim, rng);
    const auto before = binary_dot(signs_of(m), bits_of(b));
    for (std::size_t d = 0; d < dim; ++d)
      if (b[d]) m[d] = -m[d];
    CHECK(binary_dot(signs_of(m), bits_of(b)) == -before);
  }
}

TEST_CASE("BinaryBasis column sums and reconstruction") {
  std::mt19937_64 rng(4);
  const std::size_t dim = 130, k = 3;
  const auto codes = oracle::random_codes(dim, k, rng);
  const BinaryBasis basis = BinaryBasis::from_codes(codes, k, {0.5, -1.25, 2.0});
  const auto m = oracle::dense_signs(codes, k);
  double offset = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    long long s = 0;
    for (std::size_t d = 0; d < dim; ++d) s += m[d][j];
    CHECK(basis.colsum()[j] == s);
    CHECK(basis.colsum()[j] == 2 * basis.columns()[j].pop() - static_cast<long long>(dim));
    offset += basis.coeffs()[j] * static_cast<double>(s);
  }
  CHECK(basis.offset_weight() == doctest::Approx(offset));
  CHECK(basis.reconstruct() == oracle::mul(m, {0.5, -1.25, 2.0}));

  std::vector<PackedBits> too_many(kMaxRank + 1, PackedBits(4));
  CHECK_ERROR_CODE(BinaryBasis(too_many, std::vector<double>(kMaxRank + 1, 1.0)), ErrorCode::RankTooLarge);
}

TEST_CASE("approx_dot worked example") {
  // w = [1, -1] as M = [[+1], [-1]], c = [1]; x = [2, 0] at Q = 1
  const std::uint16_t codes[] = {1, 0};
  const BinaryBasis basis = BinaryBasis::from_codes(codes, 1, {1.0});
  const float x[] = {2.0F, 0.0F};
  const QuantizedMap q = quantize(x, 1);
  CHECK(q.x_min == 0.0);
  CHECK(q.significance[0] == 2.0);
  CHECK(approx_dot(basis, q) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("approx_dot on a constant input is the offset term alone") {
  const std::uint16_t codes[] = {3, 1, 0, 2, 3};
  const BinaryBasis basis = BinaryBasis::from_codes(codes, 2, {0.75, -0.5});
  const std::vector<float> x(5, 1.5F);
  const QuantizedMap q = quantize(x, 4);
  CHECK(approx_dot(basis, q) == doctest::Approx(1.5 * basis.offset_weight()).epsilon(1e-12));
  CHECK(approx_dot(basis, q, 0.0) == 0.0);
}

TEST_CASE("approx_dot equals dense evaluation of M c against the reconstructed input") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> g(0.0F, 1.0F);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t dim = 1 + rng() % 400;
    const std::size_t k = 1 + rng() % 8;
    const int bits = 1 + static_cast<int>(rng() % 8);
    const auto codes = oracle::random_codes(dim, k, rng);
    std::vector<double> c(k);
    for (auto& v : c) v = g(rng);
    const BinaryBasis basis = BinaryBasis::from_codes(codes, k, c);
    std::vector<float> x(dim);
    for (auto& v : x) v = g(rng);
    const QuantizedMap q = quantize(x, bits);
    const double want = oracle::dense_approx_dot(basis, q);
    const double got = approx_dot(basis, q);
    REQUIRE(std::abs(got - want) <= 1e-9 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("approx_dot is exact for a representable weight and a lattice input") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 2 + rng() % 100;
    const std::size_t k = 1 + rng() % 4;
    const int bits = 1 + static_cast<int>(rng() % 8);
    const auto codes = oracle::random_codes(dim, k, rng);
    std::vector<double> c(k);
    for (auto& v : c) v = static_cast<double>(1 + rng() % 7) / 4.0;
    const BinaryBasis basis = BinaryBasis::from_codes(codes, k, c);
    const auto w = basis.reconstruct();
    // levels on the lattice x_min + l * step with both endpoints present
    const double x_min = -2.0, step = 0.25;
    const std::uint32_t top = (1U << bits) - 1;
    std::vector<float> x(dim);
    for (auto& v : x) v = static_cast<float>(x_min + step * static_cast<double>(rng() % (top + 1)));
    x[0] = static_cast<float>(x_min);
    x[1] = static_cast<float>(x_min + step * top);
    const QuantizedMap q = quantize(x, bits);
    double want = 0.0;
    for (std::size_t d = 0; d < dim; ++d) want += w[d] * x[d];
    CHECK(approx_dot(basis, q) == doctest::Approx(want).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("approx_dot rejects mismatched dimensions") {
  const std::uint16_t codes[] = {1, 0, 1};
  const BinaryBasis basis = BinaryBasis::from_codes(codes, 1, {1.0});
  const float x[] = {1.0F, 2.0F};
  CHECK_ERROR_CODE(approx_dot(basis, quantize(x, 2)), ErrorCode::DimensionMismatch);
}
