#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tripath/config.hpp"
#include "tripath/params.hpp"

namespace tripath {

struct TrainingMeta {
  int epochs = 0;
  int best_epoch = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const TrainingMeta&) const = default;
};

struct Checkpoint {
  FusionParams<float> params;
  DetectorConfig config;
  TrainingMeta meta;
};

struct ManifestEntry {
  std::string name;
  std::vector<std::size_t> dims;
  std::string dtype;  // always "f32"
  std::size_t offset_bytes = 0;
};

// A checkpoint is a directory holding:
//   manifest.json  {format, config, training_meta, tensors: [{name, dims, dtype, offset_bytes}]}
//   weights.bin    row-major little-endian float32 tensors in manifest order
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "weights.bin";

/// Throws NonFiniteTensor if any parameter is NaN/Inf. The directory is
/// replaced atomically.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);

/// Throws BlobSizeMismatch, UnknownTensorName, MissingField,
/// DimensionMismatch or NonFiniteTensor.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::vector<ManifestEntry> manifest_entries(const FusionParams<float>& params);

/// Serialized forms, exposed for tests and tools.
std::string encode_manifest(const Checkpoint& checkpoint);
std::vector<unsigned char> encode_blob(const FusionParams<float>& params);
Checkpoint decode_checkpoint(const std::string& manifest, const std::vector<unsigned char>& blob);

}  // namespace tripath
