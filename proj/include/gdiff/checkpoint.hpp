#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdiff/denoiser.hpp"

namespace gdiff {

// Binary layout, all fields little-endian:
//   magic "GDIFFCKP" | u32 format version | u32 layers | u32 width |
//   u32 branch (0 discrete, 1 continuous) | u32 task (0 tsp, 1 mis) |
//   u32 diffusion steps | f64 first beta | f64 last beta |
//   u64 parameter count | f64 parameters in ParamLayout order |
//   f64 running statistics (per layer: edge mean, edge var, node mean, node var) |
//   u64 FNV-1a checksum of every preceding byte

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

std::vector<std::uint8_t> serialize_checkpoint(const DenoiserParams& params);
DenoiserParams deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const DenoiserParams& params, const std::filesystem::path& path);
DenoiserParams load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);

}  // namespace gdiff
