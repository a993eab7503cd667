#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "autotune/nn/tensor.hpp"

namespace autotune::nn {

// Checkpoint format (version 1, little-endian):
//   magic   "ATNN"
//   u32     version
//   u32     tensor count
//   per tensor: u32 name_len, name bytes, u32 ndim, u32 dims[ndim]
//   payload: float32 data for each tensor, in header order
using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;
using NamedTensorsConst = std::vector<std::pair<std::string, const Tensor*>>;

void save_checkpoint(const std::filesystem::path& path, const NamedTensorsConst& tensors);

// Shape-checked against the destination tensors; throws std::runtime_error on
// malformed files or mismatches.
void load_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);

}  // namespace autotune::nn
