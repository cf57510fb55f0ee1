#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "deepfd/adam.hpp"
#include "deepfd/config.hpp"
#include "deepfd/model.hpp"

namespace deepfd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Complete training state: enough to resume bit-exactly.
struct Checkpoint {
  TrainConfig config;
  ModelParams<float> params;
  AdamState<float> adam;
  std::uint32_t epoch = 0;            // completed epochs
  std::vector<float> phase1_losses;   // contrastive loss per iteration
  std::vector<float> phase2_losses;   // cross-entropy per iteration
};

// Layout (all integers little-endian):
//   "DFD1" | u32 version | u32 n | n tensors | u32 m | m Adam tensors |
//   u32 epoch | u32 len + f32[len] | u32 len + f32[len] | u32 crc32
// A tensor is: u16 name length, name bytes, u8 rank, rank x u32 dims,
// prod(dims) x f32. The CRC (IEEE) covers every byte after the magic.
// The config snapshot travels in the first section as tensor "meta.config",
// one f32 per byte of its `key = value` text.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
// Throws CorruptionError whose check() is "magic", "version", "crc",
// "truncated" or "layout".
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace deepfd
