#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "bdnn/inference.hpp"
#include "bdnn/model.hpp"

namespace bdnn {

// "BDN1" container:
//   bytes 0..3   magic "BDN1"
//   bytes 4..7   u32 format version
//   bytes 8..15  u64 manifest length L
//   next L bytes JSON manifest (layers, tensor offsets/lengths, endianness)
//   remainder    blob: f32 tensors, u64 packed basis words (LSB-first), f32 coefficients
// All integers and blob values are little-endian.
inline constexpr std::uint32_t kContainerVersion = 1;

enum class ContainerKind { Dense, Decomposed };

std::vector<std::uint8_t> serialize(const NetworkModel& model);
std::vector<std::uint8_t> serialize(const DecomposedModel& model);

ContainerKind peek_kind(std::span<const std::uint8_t> bytes);
NetworkModel deserialize_dense(std::span<const std::uint8_t> bytes);
DecomposedModel deserialize_decomposed(std::span<const std::uint8_t> bytes);

using AnyModel = std::variant<NetworkModel, DecomposedModel>;
AnyModel deserialize(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

void save_model(const NetworkModel& model, const std::filesystem::path& path);
void save_model(const DecomposedModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

/// FNV-1a over the serialized bytes; used to tag decomposed models with their source.
std::uint64_t fingerprint(std::span<const std::uint8_t> bytes) noexcept;

}  // namespace bdnn
