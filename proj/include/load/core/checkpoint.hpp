#pragma once

#include <filesystem>
#include <iosfwd>

#include "load/core/params.hpp"

namespace load::core {

inline constexpr char kCheckpointMagic[8] = {'L', 'O', 'A', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: magic "LOADCKPT", u32 version, then one record per parameter until EOF:
// u32 name length, name bytes, u32 rank, u32 dims[rank], f64 values. All little-endian.
void write_checkpoint(std::ostream& out, const ParamGroup& params);
void save_checkpoint(const std::filesystem::path& path, const ParamGroup& params);

// Optimizer moments are not stored; loaded groups start with zeroed moments.
ParamGroup read_checkpoint(std::istream& in);
ParamGroup load_checkpoint(const std::filesystem::path& path);

}  // namespace load::core
