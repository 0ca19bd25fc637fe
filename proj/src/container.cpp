#include "bdnn/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"

#include "bdnn/error.hpp"
#include "bdnn/manifest.hpp"

namespace bdnn {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'B', 'D', 'N', '1'};
constexpr std::size_t kHeaderBytes = 16;

template <typename T>
T byteswap_value(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
  return v;
}

class BlobWriter {
 public:
  template <typename T>
  json add(std::span<const T> values, const Shape& shape, const char* dtype) {
    const std::size_t offset = blob_.size();
    for (T v : values) put_le(blob_, v);
    return json{{"dtype", dtype}, {"shape", shape}, {"offset", offset},
                {"length", blob_.size() - offset}};
  }
  json add_f32(std::span<const float> v, const Shape& s) { return add<float>(v, s, "f32"); }

  const std::vector<std::uint8_t>& bytes() const { return blob_; }

 private:
  std::vector<std::uint8_t> blob_;
};

std::vector<std::uint8_t> assemble(json manifest, const BlobWriter& blob) {
  manifest["blob_bytes"] = blob.bytes().size();
  const std::string text = manifest.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le<std::uint32_t>(out, kContainerVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), blob.bytes().begin(), blob.bytes().end());
  return out;
}

json base_manifest(const ModelShape& shape, const char* type) {
  return json{{"format", "BDN1"}, {"version", kContainerVersion}, {"endianness", "little"},
              {"type", type}, {"model", shape_to_json(shape)}};
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw Error(ErrorCode::CorruptManifest, "bad source hash");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw Error(ErrorCode::CorruptManifest, "bad source hash");
  }
  return v;
}

// Parsed header plus a bounds-checked view of the blob.
struct Parsed {
  json manifest;
  std::span<const std::uint8_t> blob;
};

Parsed parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::BadMagic, "not a BDN1 container");
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::TruncatedBlob, "header cut short");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kContainerVersion)
    throw Error(ErrorCode::VersionMismatch, "container version " + std::to_string(version) +
                                                ", expected " + std::to_string(kContainerVersion));
  const auto manifest_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (manifest_len > bytes.size() - kHeaderBytes)
    throw Error(ErrorCode::TruncatedBlob, "manifest extends past end of file");
  Parsed p;
  try {
    p.manifest = json::parse(bytes.begin() + kHeaderBytes,
                             bytes.begin() + kHeaderBytes + static_cast<std::ptrdiff_t>(manifest_len));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, e.what());
  }
  if (!p.manifest.is_object() || p.manifest.value("endianness", "") != "little")
    throw Error(ErrorCode::CorruptManifest, "manifest missing or not little-endian");
  const std::size_t blob_start = kHeaderBytes + manifest_len;
  std::size_t blob_bytes = 0;
  try {
    blob_bytes = p.manifest.at("blob_bytes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, e.what());
  }
  const std::size_t available = bytes.size() - blob_start;
  if (available < blob_bytes)
    throw Error(ErrorCode::TruncatedBlob, "blob holds " + std::to_string(available) +
                                              " of " + std::to_string(blob_bytes) + " bytes");
  if (available > blob_bytes)
    throw Error(ErrorCode::CorruptManifest, "trailing bytes after blob");
  p.blob = bytes.subspan(blob_start, blob_bytes);
  return p;
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "u64") return 8;
  throw Error(ErrorCode::CorruptManifest, "unknown dtype '" + dtype + "'");
}

// Validates one tensor entry against the expected shape and returns its bytes.
std::span<const std::uint8_t> locate(const json& entry, const Shape& expected, const char* dtype,
                                     std::span<const std::uint8_t> blob, const std::string& what) {
  try {
    if (entry.at("dtype").get<std::string>() != dtype)
      throw Error(ErrorCode::CorruptManifest, what + ": dtype must be " + dtype);
    const auto shape = entry.at("shape").get<Shape>();
    if (shape != expected) throw Error(ErrorCode::CorruptManifest, what + ": shape differs from layer spec");
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto length = entry.at("length").get<std::size_t>();
    if (length != shape_product(shape) * dtype_size(dtype))
      throw Error(ErrorCode::CorruptManifest, what + ": length " + std::to_string(length) +
                                                  " != shape product");
    if (offset > blob.size() || length > blob.size() - offset)
      throw Error(ErrorCode::CorruptManifest, what + ": range outside blob");
    return blob.subspan(offset, length);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, what + ": " + e.what());
  }
}

Tensor read_f32(const json& entry, const Shape& shape, std::span<const std::uint8_t> blob,
                const std::string& what) {
  const auto bytes = locate(entry, shape, "f32", blob, what);
  std::vector<float> v(bytes.size() / 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = get_le<float>(bytes.data() + 4 * i);
  return Tensor(shape, std::move(v));
}

ModelShape read_shape(const json& manifest) {
  try {
    return shape_from_json(manifest.at("model"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, e.what());
  } catch (const Error& e) {
    // Shape composition errors inside a container mean the manifest is bad.
    throw Error(ErrorCode::CorruptManifest, e.what());
  }
}

const json& layer_entries(const json& manifest, std::size_t layers) {
  if (!manifest.contains("params") || !manifest["params"].is_array() ||
      manifest["params"].size() != layers)
    throw Error(ErrorCode::CorruptManifest, "params list does not match layer count");
  return manifest["params"];
}

}  // namespace

std::vector<std::uint8_t> serialize(const NetworkModel& model) {
  validate_model(model);
  json manifest = base_manifest(model.shape, "dense");
  BlobWriter blob;
  json params = json::array();
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (!model.shape.layers[i].has_weights()) {
      params.push_back(nullptr);
      continue;
    }
    const LayerParams& p = model.params[i];
    params.push_back(json{{"weight", blob.add_f32(p.weights.data(), p.weights.shape())},
                          {"bias", blob.add_f32(p.bias.data(), p.bias.shape())}});
  }
  manifest["params"] = std::move(params);
  return assemble(std::move(manifest), blob);
}

std::vector<std::uint8_t> serialize(const DecomposedModel& model) {
  validate_decomposed(model);
  json manifest = base_manifest(model.shape, "decomposed");
  manifest["rank"] = model.rank;
  manifest["bits"] = model.default_bits;
  manifest["source"] = json{{"name", model.source_name}, {"hash", hex64(model.source_hash)}};
  BlobWriter blob;
  json params = json::array();
  for (const DecomposedLayer& l : model.layers) {
    if (!l.spec.has_weights()) {
      params.push_back(nullptr);
      continue;
    }
    json entry;
    if (l.is_decomposed()) {
      const std::size_t n = l.bases.size(), k = l.bases.front().rank();
      const std::size_t words = l.bases.front().words_per_column();
      std::vector<std::uint64_t> packed;
      std::vector<float> coeffs;
      packed.reserve(n * k * words);
      coeffs.reserve(n * k);
      for (const BinaryBasis& b : l.bases) {
        if (b.rank() != k) throw Error(ErrorCode::ShapeMismatch, "mixed basis ranks in one layer");
        for (const PackedBits& col : b.columns())
          packed.insert(packed.end(), col.words().begin(), col.words().end());
        for (double c : b.coeffs()) coeffs.push_back(static_cast<float>(c));
      }
      entry["basis"] = blob.add<std::uint64_t>(packed, {n, k, words}, "u64");
      entry["coeffs"] = blob.add_f32(coeffs, {n, k});
    } else {
      entry["weight"] = blob.add_f32(l.exact_weights.data(), l.exact_weights.shape());
    }
    entry["bias"] = blob.add_f32(l.bias.data(), l.bias.shape());
    params.push_back(std::move(entry));
  }
  manifest["params"] = std::move(params);
  return assemble(std::move(manifest), blob);
}

ContainerKind peek_kind(std::span<const std::uint8_t> bytes) {
  const Parsed p = parse(bytes);
  const std::string type = p.manifest.value("type", "");
  if (type == "dense") return ContainerKind::Dense;
  if (type == "decomposed") return ContainerKind::Decomposed;
  throw Error(ErrorCode::CorruptManifest, "unknown container type '" + type + "'");
}

namespace {

NetworkModel dense_impl(std::span<const std::uint8_t> bytes) {
  const Parsed p = parse(bytes);
  if (p.manifest.value("type", "") != "dense")
    throw Error(ErrorCode::CorruptManifest, "container does not hold a dense model");
  NetworkModel model;
  model.shape = read_shape(p.manifest);
  const json& params = layer_entries(p.manifest, model.shape.layers.size());
  for (std::size_t i = 0; i < model.shape.layers.size(); ++i) {
    const LayerSpec& spec = model.shape.layers[i];
    LayerParams lp;
    if (spec.has_weights()) {
      const std::string what = "layer " + std::to_string(i);
      lp.weights = read_f32(params[i].value("weight", json{}), spec.weight_shape(), p.blob, what + " weight");
      lp.bias = read_f32(params[i].value("bias", json{}), {spec.out_maps}, p.blob, what + " bias");
    }
    model.params.push_back(std::move(lp));
  }
  validate_model(model);
  return model;
}

DecomposedModel decomposed_impl(std::span<const std::uint8_t> bytes) {
  const Parsed p = parse(bytes);
  if (p.manifest.value("type", "") != "decomposed")
    throw Error(ErrorCode::CorruptManifest, "container does not hold a decomposed model");
  DecomposedModel model;
  model.shape = read_shape(p.manifest);
  try {
    model.rank = p.manifest.at("rank").get<std::size_t>();
    model.default_bits = p.manifest.at("bits").get<int>();
    model.source_name = p.manifest.at("source").at("name").get<std::string>();
    model.source_hash = parse_hex64(p.manifest.at("source").at("hash").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, e.what());
  }
  if (model.rank < 1 || model.rank > kMaxRank)
    throw Error(ErrorCode::CorruptManifest, "rank out of range");
  const json& params = layer_entries(p.manifest, model.shape.layers.size());
  for (std::size_t i = 0; i < model.shape.layers.size(); ++i) {
    DecomposedLayer l;
    l.spec = model.shape.layers[i];
    if (l.spec.has_weights()) {
      const std::string what = "layer " + std::to_string(i);
      const json& e = params[i];
      if (!e.is_object()) throw Error(ErrorCode::CorruptManifest, what + ": missing parameters");
      if (e.contains("weight")) {
        l.exact_weights = read_f32(e["weight"], l.spec.weight_shape(), p.blob, what + " weight");
      } else {
        const std::size_t n = l.spec.out_maps, k = model.rank, dim = l.spec.weight_dim();
        const std::size_t words = words_for(dim);
        const auto raw = locate(e.value("basis", json{}), {n, k, words}, "u64", p.blob, what + " basis");
        const Tensor coeffs = read_f32(e.value("coeffs", json{}), {n, k}, p.blob, what + " coeffs");
        l.bases.reserve(n);
        for (std::size_t f = 0; f < n; ++f) {
          std::vector<PackedBits> cols;
          cols.reserve(k);
          for (std::size_t j = 0; j < k; ++j) {
            std::vector<std::uint64_t> w(words);
            for (std::size_t t = 0; t < words; ++t)
              w[t] = get_le<std::uint64_t>(raw.data() + 8 * ((f * k + j) * words + t));
            try {
              cols.emplace_back(dim, std::move(w));
            } catch (const Error& err) {
              throw Error(ErrorCode::CorruptManifest, what + ": " + err.what());
            }
          }
          std::vector<double> c(k);
          for (std::size_t j = 0; j < k; ++j) c[j] = coeffs[f * k + j];
          l.bases.emplace_back(std::move(cols), std::move(c));
        }
      }
      l.bias = read_f32(e.value("bias", json{}), {l.spec.out_maps}, p.blob, what + " bias");
    }
    model.layers.push_back(std::move(l));
  }
  validate_decomposed(model);
  return model;
}

}  // namespace

NetworkModel deserialize_dense(std::span<const std::uint8_t> bytes) {
  try {
    return dense_impl(bytes);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, e.what());
  }
}

DecomposedModel deserialize_decomposed(std::span<const std::uint8_t> bytes) {
  try {
    return decomposed_impl(bytes);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, e.what());
  }
}

AnyModel deserialize(std::span<const std::uint8_t> bytes) {
  if (peek_kind(bytes) == ContainerKind::Dense) return deserialize_dense(bytes);
  return deserialize_decomposed(bytes);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void save_model(const NetworkModel& model, const std::filesystem::path& path) {
  write_file(path, serialize(model));
}

void save_model(const DecomposedModel& model, const std::filesystem::path& path) {
  write_file(path, serialize(model));
}

AnyModel load_model(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::uint64_t fingerprint(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace bdnn
