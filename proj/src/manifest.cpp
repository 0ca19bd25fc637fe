#include "bdnn/manifest.hpp"

#include <fstream>

#include "bdnn/error.hpp"

namespace bdnn {

using nlohmann::json;

namespace {

std::size_t get_size(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw Error(ErrorCode::CorruptManifest, std::string("field '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

std::size_t require_size(const json& j, const char* key) {
  if (!j.contains(key))
    throw Error(ErrorCode::CorruptManifest, std::string("missing field '") + key + "'");
  return get_size(j, key, 0);
}

}  // namespace

ModelShape shape_from_json(const json& j) {
  try {
    ModelShape shape;
    shape.name = j.value("name", std::string{});
    for (const json& e : j.at("input")) shape.input.push_back(e.get<std::size_t>());

    Shape current = shape.input;
    std::size_t index = 0;
    for (const json& l : j.at("layers")) {
      LayerSpec spec;
      spec.kind = layer_kind_from_string(l.at("kind").get<std::string>());
      switch (spec.kind) {
        case LayerKind::Conv: {
          const std::size_t inferred = current.empty() ? 0 : current[0];
          spec = LayerSpec::conv(require_size(l, "out"), get_size(l, "in", inferred),
                                 require_size(l, "kernel"), get_size(l, "stride", 1),
                                 get_size(l, "pad", 0));
          break;
        }
        case LayerKind::Fc:
          spec = LayerSpec::fc(get_size(l, "in", shape_product(current)), require_size(l, "out"));
          break;
        case LayerKind::MaxPool: {
          const std::size_t window = require_size(l, "window");
          spec = LayerSpec::maxpool(window, get_size(l, "stride", window));
          break;
        }
        case LayerKind::Relu: spec = LayerSpec::relu(); break;
      }
      current = spec.output_shape(current, index);
      shape.layers.push_back(spec);
      ++index;
    }
    return shape;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, e.what());
  }
}

json shape_to_json(const ModelShape& shape) {
  json layers = json::array();
  for (const LayerSpec& s : shape.layers) {
    json l{{"kind", to_string(s.kind)}};
    switch (s.kind) {
      case LayerKind::Conv:
        l["out"] = s.out_maps;
        l["in"] = s.in_maps;
        l["kernel"] = s.kernel;
        l["stride"] = s.stride;
        l["pad"] = s.pad;
        break;
      case LayerKind::Fc:
        l["out"] = s.out_maps;
        l["in"] = s.in_maps;
        break;
      case LayerKind::MaxPool:
        l["window"] = s.kernel;
        l["stride"] = s.stride;
        break;
      case LayerKind::Relu: break;
    }
    layers.push_back(std::move(l));
  }
  return json{{"name", shape.name}, {"input", shape.input}, {"layers", std::move(layers)}};
}

ModelShape load_shape_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, path.string() + ": " + e.what());
  }
  ModelShape shape = shape_from_json(j);
  if (shape.name.empty()) shape.name = path.stem().string();
  return shape;
}

std::filesystem::path bundled_manifest(const std::string& name) {
  return std::filesystem::path(BDNN_DATA_DIR) / "manifests" / (name + ".json");
}

}  // namespace bdnn
