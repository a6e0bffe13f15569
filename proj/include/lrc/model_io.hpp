#pragma once

// On-disk model: a text manifest (model.manifest, key/value grammar of
// kv_config.hpp) beside a raw blob (model.bin) of little-endian float32
// values, row-major, one contiguous record per layer:
//
//   conv             kernel (D, D, S, T)
//   factorized_conv  u3 (S x R3), core (D, D, R3, R4), u4 (T x R4)
//   fc               weight (M x N)
//   factorized_fc    a (M x R), b (R x N)
//
// Header keys: format_version, blob, blob_bytes, checksum (crc32, 8 hex
// digits), input (C H W), classes, layers. One [layer] section per layer
// with name, kind, dims (conv: D S T; fc: M N), ranks (factorized only),
// stride and padding (conv kinds), offset, length (bytes).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrc/kv_config.hpp"
#include "lrc/model.hpp"

namespace lrc {

inline constexpr std::uint32_t kManifestVersion = 1;
inline constexpr const char* kManifestFile = "model.manifest";
inline constexpr const char* kBlobFile = "model.bin";

struct LayerRecord {
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> ranks;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  bool operator==(const LayerRecord&) const = default;
};

struct ModelManifest {
  std::uint32_t format_version = kManifestVersion;
  std::string blob = kBlobFile;
  std::uint64_t blob_bytes = 0;
  std::uint32_t checksum = 0;
  InputShape input;
  std::size_t classes = 0;
  std::vector<LayerRecord> layers;
};

/// Layout of `model` (offsets, lengths, blob size); checksum left at 0.
ModelManifest build_manifest(const Model& model);
std::string serialize_blob(const Model& model);
std::uint32_t blob_checksum(const std::string& blob);

KvDocument manifest_to_kv(const ModelManifest& m);
ModelManifest manifest_from_kv(const KvDocument& doc);

void save_model(const Model& model, const std::filesystem::path& dir);
Model load_model(const std::filesystem::path& dir);

} // namespace lrc
