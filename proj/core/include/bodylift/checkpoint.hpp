#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bodylift/error.hpp"
#include "bodylift/model.hpp"
#include "bodylift/pose.hpp"

namespace bodylift {

/// Binary checkpoint, all integers and reals little-endian:
///
///   "PLDA"                      4-byte magic
///   u32 version                 kCheckpointVersion
///   u32 joints, u32 width
///   f64 dropout
///   u32 joint_set, u32 variant  JointSet / net::Variant codes
///   u32 tensor_count
///   per tensor: u32 rank, rank × u64 dims, f64 data[]   (ModelParams::state_tensors order)
///   NormStats: mean2d, std2d, mean3d, std3d, each u64 length + f64 data[]
///   u32 CRC-32 of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct Checkpoint {
  net::ModelParams model;
  NormStats stats;
};

std::vector<std::uint8_t> serialize_checkpoint(const net::ModelParams& model, const NormStats& stats);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const net::ModelParams& model, const NormStats& stats, const std::filesystem::path& path);
/// Throws CheckpointError naming the failure (magic, version, CRC, truncation, layout).
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bodylift
