#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "bdnn/model.hpp"

namespace bdnn {

inline constexpr double kBytesPerMiB = 1024.0 * 1024.0;

// Byte accounting: 4 bytes per dense parameter; decomposed filters take
// D*k/8 bytes of tightly packed signs plus 4 bytes per coefficient. Storage
// pads each column to 64 bits but the accounting does not.
struct SizeReport {
  struct Layer {
    std::size_t index = 0;
    LayerKind kind = LayerKind::Conv;
    std::size_t units = 0;  // N
    std::size_t dim = 0;    // D
    double original_bytes = 0.0;
    double decomposed_bytes = 0.0;
  };

  std::size_t rank = 0;
  std::vector<Layer> layers;
  double conv_original_bytes = 0.0;
  double conv_decomposed_bytes = 0.0;
  double fc_original_bytes = 0.0;
  double fc_decomposed_bytes = 0.0;
};

SizeReport size_report(const ModelShape& shape, std::size_t rank);

// Per output unit: k*Q*ceil(D/64) word ANDs, as many popcounts, and
// k*Q + k + 1 real multiplies.
struct OpCountReport {
  struct Layer {
    std::size_t index = 0;
    LayerKind kind = LayerKind::Conv;
    std::size_t outputs = 0;  // N * out_h * out_w for conv, N for fc
    std::size_t dim = 0;
    std::uint64_t and_ops = 0;
    std::uint64_t bitcount_ops = 0;
    std::uint64_t multiply_ops = 0;
    std::uint64_t dense_macs = 0;
  };

  std::size_t rank = 0;
  int bits = 0;
  std::vector<Layer> layers;
  std::uint64_t conv_and = 0, conv_bitcount = 0, conv_multiply = 0, conv_dense_macs = 0;
  std::uint64_t fc_and = 0, fc_bitcount = 0, fc_multiply = 0, fc_dense_macs = 0;
};

OpCountReport opcount_report(const ModelShape& shape, std::size_t rank, int bits);

inline double to_mib(double bytes) { return bytes / kBytesPerMiB; }

nlohmann::json to_json(const SizeReport& r);
nlohmann::json to_json(const OpCountReport& r);
std::string to_text(const SizeReport& r);
std::string to_text(const OpCountReport& r);

}  // namespace bdnn
