#pragma once

#include <string>
#include <vector>

#include "kivi/matrix.hpp"

namespace kivi {

// Binary tensor dump format:
//   magic   "KVQD"          4 bytes
//   version u32 = 1         little-endian
//   dtype   u8  = 0         float32
//   ndim    u8              1, 2 or 3
//   dims    ndim x u64      little-endian
//   payload row-major little-endian float32
//
// 1-D dumps load as a 1 x n matrix, 2-D as one matrix, 3-D
// (heads x tokens x dim) as one matrix per head.
inline constexpr char kDumpMagic[4] = {'K', 'V', 'Q', 'D'};
inline constexpr std::uint32_t kDumpVersion = 1;

std::vector<Matrix> read_dump(const std::string& path);

// One tensor writes as 2-D; several (same-shaped) tensors write as 3-D.
void write_dump(const std::string& path, const std::vector<Matrix>& tensors);

}  // namespace kivi
