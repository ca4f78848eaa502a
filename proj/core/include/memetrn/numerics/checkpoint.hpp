#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "memetrn/numerics/parameter.hpp"

namespace memetrn {

// Binary parameter archive, all integers and floats little-endian:
//
//   "MTRNCKPT"                      8-byte magic
//   u32 format_version              currently 1
//   u64 config_hash                 FNV-1a of the metadata string
//   u32 n, n bytes                  metadata (JSON text: model config, variant)
//   u32 count                       number of parameters
//   count x { u32 n, n bytes name; u32 rank; rank x u64 dim; f64 values[] }
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::string metadata;
  std::vector<std::pair<std::string, Tensor>> entries;
};

std::vector<unsigned char> encode_checkpoint(const ParameterStore& params, const std::string& metadata);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params, const std::string& metadata);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies archived values into a store whose names and shapes match exactly.
void load_parameters(const Checkpoint& ckpt, ParameterStore& params);

}  // namespace memetrn
