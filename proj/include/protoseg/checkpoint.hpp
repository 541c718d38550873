#pragma once

#include <span>
#include <string>
#include <vector>

#include "protoseg/tensor.hpp"

namespace protoseg {

/// Checkpoint file: magic "PSG1", u32 little-endian tensor count, then per
/// tensor: u16 name length, UTF-8 name, u8 rank, u32[rank] dims, raw
/// little-endian f64 payload. Loading validates magic, sizes, name
/// uniqueness, and value finiteness; any violation throws FormatError and
/// leaves no partial state behind.
void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

std::vector<unsigned char> encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const unsigned char> bytes);

/// Copy loaded values into an existing parameter set by name; every
/// parameter must be present with a matching shape. Extra tensors in
/// `loaded` are ignored (the embedded config rides along as one).
void load_into(std::span<const NamedTensor> params, std::span<const NamedTensor> loaded);

/// Find a tensor by name; returns nullptr when absent.
const Tensor* find_tensor(std::span<const NamedTensor> tensors, const std::string& name);

}  // namespace protoseg
