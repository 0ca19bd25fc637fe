#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "bdnn/inference.hpp"
#include "bdnn/model.hpp"

namespace bdnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// Runs one command line (args[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CompareOptions {
  std::vector<int> bits{4, 6, 8};
  std::size_t inputs = 20;
  std::uint64_t seed = 0;
  bool keep_exact_first = false;
  int threads = 1;
};

struct CompareCell {
  std::size_t rank = 0;
  int bits = 0;
  std::size_t inputs = 0;
  double mean_rel_error = 0.0;
  double stderr_rel_error = 0.0;
  double top1_agreement = 0.0;
  bool first_layer_identical = false;  // only meaningful with keep_exact_first
};

/// Exact vs approximate forward on seeded Gaussian inputs, one cell per
/// (decomposed model, bit depth).
std::vector<CompareCell> compare_models(const NetworkModel& model,
                                        const std::vector<DecomposedModel>& decomposed,
                                        const CompareOptions& opts);

nlohmann::json compare_to_json(const std::vector<CompareCell>& cells, const CompareOptions& opts);

struct BenchOptions {
  int bits = 6;
  std::size_t runs = 5;
  int threads = 1;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinBenchRuns = 5;

struct BenchResult {
  std::size_t rank = 0;
  int bits = 0;
  std::size_t runs = 0;
  int threads = 1;
  double exact_seconds = 0.0;   // median
  double approx_seconds = 0.0;  // median
  double speedup = 0.0;
  double rel_error = 0.0;
  bool top1_agree = false;
  double size_original_mb = 0.0;
  double size_decomposed_mb = 0.0;
  std::vector<double> exact_samples;
  std::vector<double> approx_samples;
};

/// Median-of-runs wall clock for both paths on one seeded input; one warm-up
/// run of each is discarded. Throws BadConfig when runs < 5.
BenchResult bench_model(const DecomposedModel& decomposed, const NetworkModel& reference,
                        const BenchOptions& opts);

nlohmann::json bench_to_json(const BenchResult& r, const std::string& baseline);

double relative_l2(const Tensor& approx, const Tensor& exact);
std::size_t argmax(const Tensor& t);

}  // namespace bdnn::cli
