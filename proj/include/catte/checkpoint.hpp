#pragma once

// Binary checkpoint: magic "CATTECKP", u32 format version, a key=value text
// header (model configuration), then named f64 blocks. All integers and
// doubles are little-endian; matrices are row-major.
//
//   u64 header_bytes, header text
//   u32 block_count
//   per block: u32 name_bytes, name, u64 rows, u64 cols, rows*cols f64

#include <filesystem>

#include "catte/model.hpp"

namespace catte {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const CatteModel& model);
CatteModel load_checkpoint(const std::filesystem::path& path);

}  // namespace catte
