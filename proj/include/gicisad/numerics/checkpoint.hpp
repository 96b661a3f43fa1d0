#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gicisad/numerics/params.hpp"

namespace gicisad {

/// Checkpoint container, all integers little-endian:
///
///   magic     8 bytes  "GICISAD\x1a"
///   version   u32      currently 1
///   meta_len  u32      followed by meta_len bytes of UTF-8 metadata text
///   count     u64      number of entries, then per entry:
///     name_len u32, name bytes (UTF-8)
///     rank     u32, rank x u64 dims
///     values   prod(dims) x IEEE-754 binary32
///
/// docs/checkpoint-format.md carries the same description.
inline constexpr char kCheckpointMagic[8] = {'G', 'I', 'C', 'I', 'S', 'A', 'D', '\x1a'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string metadata;
  std::vector<CheckpointEntry> entries;
};

std::vector<unsigned char> encode_checkpoint(const ParamSet& params, const std::string& metadata);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void write_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                      const std::string& metadata);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies entry values into the matching parameters. Every parameter must
/// be present with the same shape.
void load_parameters(const Checkpoint& ckpt, ParamSet& params);

}  // namespace gicisad
