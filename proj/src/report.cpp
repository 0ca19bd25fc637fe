#include "bdnn/report.hpp"

#include <cstdio>
#include <sstream>

#include "bdnn/error.hpp"
#include "bdnn/packed_bits.hpp"

namespace bdnn {

using nlohmann::json;

SizeReport size_report(const ModelShape& shape, std::size_t rank) {
  if (rank < 1) throw Error(ErrorCode::BadConfig, "rank must be >= 1");
  validate_shape(shape);
  SizeReport r;
  r.rank = rank;
  const double k = static_cast<double>(rank);
  for (std::size_t i = 0; i < shape.layers.size(); ++i) {
    const LayerSpec& s = shape.layers[i];
    if (!s.has_weights()) continue;
    SizeReport::Layer l;
    l.index = i;
    l.kind = s.kind;
    l.units = s.out_maps;
    l.dim = s.weight_dim();
    const double n = static_cast<double>(l.units), d = static_cast<double>(l.dim);
    l.original_bytes = 4.0 * n * d;
    l.decomposed_bytes = n * (d * k / 8.0 + 4.0 * k);
    if (s.kind == LayerKind::Conv) {
      r.conv_original_bytes += l.original_bytes;
      r.conv_decomposed_bytes += l.decomposed_bytes;
    } else {
      r.fc_original_bytes += l.original_bytes;
      r.fc_decomposed_bytes += l.decomposed_bytes;
    }
    r.layers.push_back(l);
  }
  return r;
}

OpCountReport opcount_report(const ModelShape& shape, std::size_t rank, int bits) {
  if (rank < 1) throw Error(ErrorCode::BadConfig, "rank must be >= 1");
  if (bits < 1) throw Error(ErrorCode::BadConfig, "bit depth must be >= 1");
  validate_shape(shape);
  const std::vector<Shape> acts = shape.activation_shapes();
  OpCountReport r;
  r.rank = rank;
  r.bits = bits;
  const std::uint64_t k = rank, q = static_cast<std::uint64_t>(bits);
  for (std::size_t i = 0; i < shape.layers.size(); ++i) {
    const LayerSpec& s = shape.layers[i];
    if (!s.has_weights()) continue;
    OpCountReport::Layer l;
    l.index = i;
    l.kind = s.kind;
    l.outputs = shape_product(acts[i + 1]);
    l.dim = s.weight_dim();
    const std::uint64_t outputs = l.outputs;
    const std::uint64_t words = words_for(l.dim);
    l.and_ops = outputs * k * q * words;
    l.bitcount_ops = outputs * k * q * words;
    l.multiply_ops = outputs * (k * q + k + 1);
    l.dense_macs = outputs * l.dim;
    if (s.kind == LayerKind::Conv) {
      r.conv_and += l.and_ops;
      r.conv_bitcount += l.bitcount_ops;
      r.conv_multiply += l.multiply_ops;
      r.conv_dense_macs += l.dense_macs;
    } else {
      r.fc_and += l.and_ops;
      r.fc_bitcount += l.bitcount_ops;
      r.fc_multiply += l.multiply_ops;
      r.fc_dense_macs += l.dense_macs;
    }
    r.layers.push_back(l);
  }
  return r;
}

json to_json(const SizeReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers)
    layers.push_back({{"layer", l.index}, {"kind", to_string(l.kind)}, {"units", l.units},
                      {"dim", l.dim}, {"original_bytes", l.original_bytes},
                      {"decomposed_bytes", l.decomposed_bytes}});
  return {{"schema", "bdnn.size_report/1"},
          {"rank", r.rank},
          {"unit", "MiB (2^20 bytes), shown as MB"},
          {"layers", std::move(layers)},
          {"conv", {{"original_mb", to_mib(r.conv_original_bytes)},
                    {"decomposed_mb", to_mib(r.conv_decomposed_bytes)}}},
          {"fc", {{"original_mb", to_mib(r.fc_original_bytes)},
                  {"decomposed_mb", to_mib(r.fc_decomposed_bytes)}}}};
}

json to_json(const OpCountReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers)
    layers.push_back({{"layer", l.index}, {"kind", to_string(l.kind)}, {"outputs", l.outputs},
                      {"dim", l.dim}, {"and", l.and_ops}, {"bitcount", l.bitcount_ops},
                      {"multiply", l.multiply_ops}, {"dense_macs", l.dense_macs}});
  return {{"schema", "bdnn.opcount_report/1"},
          {"rank", r.rank},
          {"bits", r.bits},
          {"convention", "per output: k*Q*ceil(D/64) word AND and popcount, k*Q+k+1 multiplies"},
          {"layers", std::move(layers)},
          {"conv", {{"and", r.conv_and}, {"bitcount", r.conv_bitcount},
                    {"multiply", r.conv_multiply}, {"dense_macs", r.conv_dense_macs}}},
          {"fc", {{"and", r.fc_and}, {"bitcount", r.fc_bitcount},
                  {"multiply", r.fc_multiply}, {"dense_macs", r.fc_dense_macs}}}};
}

namespace {

std::string line(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double millions(std::uint64_t v) { return static_cast<double>(v) / 1e6; }

}  // namespace

std::string to_text(const SizeReport& r) {
  std::ostringstream os;
  os << line("Model size [MB], rank k=%zu\n", r.rank);
  os << line("%-6s %-8s %8s %8s %12s %12s\n", "layer", "kind", "N", "D", "original", "decomposed");
  for (const auto& l : r.layers)
    os << line("%-6zu %-8s %8zu %8zu %12.2f %12.2f\n", l.index, to_string(l.kind), l.units, l.dim,
               to_mib(l.original_bytes), to_mib(l.decomposed_bytes));
  os << line("%-24s %12.2f %12.2f\n", "convolutional", to_mib(r.conv_original_bytes),
             to_mib(r.conv_decomposed_bytes));
  os << line("%-24s %12.2f %12.2f\n", "fully connected", to_mib(r.fc_original_bytes),
             to_mib(r.fc_decomposed_bytes));
  return os.str();
}

std::string to_text(const OpCountReport& r) {
  std::ostringstream os;
  os << line("Operations [million], rank k=%zu, bits Q=%d\n", r.rank, r.bits);
  os << line("%-6s %-8s %10s %10s %10s %10s %10s\n", "layer", "kind", "outputs", "AND",
             "bitcount", "multiply", "dense MAC");
  for (const auto& l : r.layers)
    os << line("%-6zu %-8s %10zu %10.3f %10.3f %10.3f %10.3f\n", l.index, to_string(l.kind),
               l.outputs, millions(l.and_ops), millions(l.bitcount_ops), millions(l.multiply_ops),
               millions(l.dense_macs));
  os << line("%-26s %10.3f %10.3f %10.3f %10.3f\n", "convolutional", millions(r.conv_and),
             millions(r.conv_bitcount), millions(r.conv_multiply), millions(r.conv_dense_macs));
  os << line("%-26s %10.3f %10.3f %10.3f %10.3f\n", "fully connected", millions(r.fc_and),
             millions(r.fc_bitcount), millions(r.fc_multiply), millions(r.fc_dense_macs));
  return os.str();
}

}  // namespace bdnn
