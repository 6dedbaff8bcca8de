// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "signx/nn.hpp"

namespace signx {

// Checkpoint container, magic "SXCK":
//   magic[4] | version u16 | count u32 |
//   per parameter: name_len u16, name bytes, rank u8, extents u32 x rank,
//   float64 payload, all little-endian.
void save_checkpoint(const std::string& path, const ParamStore& params);
ParamStore load_checkpoint(const std::string& path);

// FNV-1a over the raw file bytes; used to assert that stages leave
// checkpoints untouched.
std::uint64_t file_checksum(const std::string& path);

}  // namespace signx
