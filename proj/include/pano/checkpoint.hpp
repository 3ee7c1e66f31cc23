#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "pano/tensor.hpp"

namespace pano {

// Little-endian checkpoint container.
//
//   magic   8 bytes  "PANOCKPT"
//   version u32      currently 1
//   count   u32      number of tensors
//   per tensor:
//     name_len u32, name bytes
//     dtype   u8    0 = f64 (the only dtype written; 1 = f32 accepted on read)
//     rank    u8
//     dims    u32 * rank
//     values  dtype-sized little-endian scalars, row major
void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

// FNV-1a over the file bytes; used to assert checkpoint identity.
std::uint64_t file_hash(const std::string& path);

}  // namespace pano
