#pragma once

#include <map>
#include <string>

#include "svkit/tensor.hpp"

namespace svkit {

// TNSR container: magic "TNSR", u8 rank, u32 little-endian dims, then
// 32-bit little-endian floats in row-major order.
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

// Checkpoint: a sequence of named TNSR records, each preceded by a u32
// little-endian name length and the UTF-8 name. Order follows the model's
// state list.
void write_checkpoint(const std::string& path, const std::vector<NamedTensor<float>>& state);
std::map<std::string, Tensor> read_checkpoint(const std::string& path);

// Copies checkpoint contents into an existing state list; every entry must
// be present with a matching shape.
void load_state(const std::string& path, std::vector<NamedTensor<float>> state);

}  // namespace svkit
