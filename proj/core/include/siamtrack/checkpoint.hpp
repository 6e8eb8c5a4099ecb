#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "siamtrack/model.hpp"
#include "siamtrack/tensor.hpp"

namespace siamtrack::ckpt {

inline constexpr char kMagic[8] = {'S', 'I', 'A', 'M', 'T', 'R', 'K', '\0'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct LayerEntry {
  std::string name;
  Shape shape;
  friend bool operator==(const LayerEntry&, const LayerEntry&) = default;
};

struct Manifest {
  std::uint32_t format_version = kFormatVersion;
  std::string preset;
  std::vector<LayerEntry> layers;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::uint64_t seed = 0;
  std::string created;      // ISO-8601 UTC
  std::string blob;         // blob file name, relative to the manifest
  std::string blob_sha256;  // lowercase hex
  std::string config;       // serialised RunConfig
};

std::string sha256_hex(std::span<const unsigned char> bytes);

std::vector<LayerEntry> layer_table(SiameseModel& model);

/// Magic, u32 version, u64 value count, then every state tensor as
/// little-endian f64 in layer-table order.
std::vector<unsigned char> encode_blob(SiameseModel& model);

/// Writes `<stem>.bin` and `<stem>.json`. Fills preset, layers, blob,
/// checksum and timestamp; returns the manifest as written.
Manifest save(SiameseModel& model, Manifest meta, const std::filesystem::path& stem);

Manifest read_manifest(const std::filesystem::path& manifest_path);

/// Verifies checksum, magic, version and the layer table against `model`
/// before touching any parameter. Throws IoError or ShapeError.
Manifest load(SiameseModel& model, const std::filesystem::path& manifest_path);

}  // namespace siamtrack::ckpt
