#pragma once

#include <map>
#include <string>
#include <vector>

#include "neverup/network.hpp"

namespace neverup {

// Versioned binary parameter checkpoint.
// Layout (little-endian):
//   magic "NGU1" | u32 version | u32 tensor count
//   manifest: per tensor { u32 name_len, name bytes, u32 ndim, u32 dims[] }
//   payload:  per tensor, row-major float32 values in manifest order
void save_checkpoint(const std::string& path, const std::vector<NamedParamConst>& tensors);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

// Overwrites matching parameters in-place; every network parameter must be
// present with the right shape.
void restore_params(std::vector<NamedParam> params, const std::map<std::string, Tensor>& loaded);

}  // namespace neverup
