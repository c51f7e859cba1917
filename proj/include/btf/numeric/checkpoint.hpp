#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "btf/numeric/optim.hpp"

namespace btf::numeric {

// Archive layout (little endian):
//   "BTFCKPT\0" | u32 version | u32 record count
//   per record: u32 name bytes | name | u32 rank | u64 dims[rank] | u8 dtype (4 or 8) | values
//   u32 crc32 of everything before it
struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::uint8_t dtype = 8;
  std::vector<double> values;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
std::string encode_checkpoint(const ParamList<T>& params);
std::vector<CheckpointRecord> decode_checkpoint(const std::string& bytes);

template <typename T>
void save_checkpoint(const ParamList<T>& params, const std::filesystem::path& path);
std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path);

// Copies archived values into `params` by name; every parameter must be
// present with an identical shape. Values are converted to T.
template <typename T>
void load_checkpoint(ParamList<T>& params, const std::filesystem::path& path);
template <typename T>
void assign_records(ParamList<T>& params, const std::vector<CheckpointRecord>& records);

}  // namespace btf::numeric
