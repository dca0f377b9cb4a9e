#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "timetk/autodiff.hpp"

// Binary checkpoint keyed by parameter name. Layout (little-endian):
//   magic "TTKCKPT\0" | u32 version | u64 entry count
//   per entry: u32 name length | name bytes | u8 trainable |
//              u32 rank | u64 dims[rank] | f64 values[numel]
// See docs/checkpoint-format.md.
namespace timetk::checkpoint {

inline constexpr char kMagic[8] = {'T', 'T', 'K', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kVersion = 1;

struct Entry {
  std::string name;
  bool trainable = true;
  Tensor value;
};

void save(const std::filesystem::path& path, const ParameterList& params);
std::vector<Entry> read(const std::filesystem::path& path);

// Copies stored values into `params` by name. Missing names, extra names and
// shape mismatches raise DataError.
void load(const std::filesystem::path& path, const ParameterList& params);

// In-memory value snapshot, used to restore the best epoch.
std::vector<Tensor> snapshot(const ParameterList& params);
void restore(const ParameterList& params, const std::vector<Tensor>& values);

}  // namespace timetk::checkpoint
