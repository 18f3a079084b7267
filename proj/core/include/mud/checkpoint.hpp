#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mud/tensor.hpp"

namespace mud {

/// Named float32 tensors, little-endian, in file order:
///   "MUDW" | u32 version=1 | u32 count |
///   per tensor: u32 name_len | name bytes | u32 rank | u32 dims[rank] | f32 data
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void write_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors read_checkpoint(const std::filesystem::path& path);

/// Plain "key=value" text files (one pair per line, '#' comments allowed),
/// used for run configuration written next to checkpoints.
void write_key_values(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& pairs);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

}  // namespace mud
