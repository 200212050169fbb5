#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tilerl/nn/network.hpp"
#include "tilerl/nn/optim.hpp"

namespace tilerl::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Network<float> net;
  std::optional<OptimizerState> optimizer;
};

// Binary container, little-endian throughout:
//   "TLRLCKPT" u32 version | str metadata_json | u32 entries
//   entry: str name | str spec_json | u32 blocks | block* | u8 has_optimizer [optimizer]
//   block: str name | u32 ndim | i32 dims[ndim] | f32 data[]
//   optimizer: i64 step | f64 lr beta1 beta2 eps clip_norm | f32 m[] | f32 v[] (per block)
//   str: u32 length | bytes
struct Checkpoint {
  std::string metadata_json = "{}";
  std::vector<CheckpointEntry> entries;

  [[nodiscard]] const CheckpointEntry& get(const std::string& name) const;
};

// Writes to a temporary sibling then renames, so a crash never leaves a
// truncated checkpoint under the final name.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace tilerl::nn
