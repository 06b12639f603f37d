#pragma once

#include "picat/tensor.hpp"

#include <string>
#include <vector>

namespace picat {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// PICT container: magic "PICT", u32 LE version, u32 LE tensor count;
// per tensor: u32 LE name length, UTF-8 name, u32 LE rank, u32 LE extents,
// float32 LE payload. Byte-exact across platforms.
inline constexpr std::uint32_t kPictVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

void save_checkpoint(const std::string& path, const ParamSet& params);
// copies stored values into matching params; errors on name/shape mismatch
void load_checkpoint_into(const std::string& path, ParamSet& params);

} // namespace picat
