#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "bdnn/model.hpp"

namespace bdnn {

// Shape manifests are JSON:
//   {"name": "...", "input": [C, H, W],
//    "layers": [{"kind": "conv", "out": 96, "kernel": 11, "stride": 4, "pad": 0},
//               {"kind": "relu"}, {"kind": "maxpool", "window": 3, "stride": 2},
//               {"kind": "fc", "out": 4096}, ...]}
// Input extents of each layer are inferred; an explicit "in" must agree.
ModelShape shape_from_json(const nlohmann::json& j);
nlohmann::json shape_to_json(const ModelShape& shape);

ModelShape load_shape_manifest(const std::filesystem::path& path);

/// Path of a manifest shipped under data/manifests (e.g. "alexnet").
std::filesystem::path bundled_manifest(const std::string& name);

}  // namespace bdnn
