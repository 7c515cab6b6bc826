#pragma once

// Model container, little-endian:
//
//   offset  size  field
//   0       8     magic "NPADMODL"
//   8       4     u32 format version (1)
//   12      8     u64 |V_src|
//   20      8     u64 |V_tgt|
//   28      8     u64 d_emb
//   36      8     u64 d_hid
//   44      4     u32 tensor count N
//   48      ...   N tensor records:
//                   u32 name length L, L bytes of name (no terminator),
//                   u64 rows, u64 cols, rows*cols IEEE-754 f64, row-major
//
// Tensor records are written in ModelParams::for_each_tensor order; the reader
// matches by name and rejects missing, unknown, duplicate or misshapen tensors.

#include <filesystem>
#include <functional>
#include <iosfwd>

#include "npad/model.hpp"

namespace npad {

inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_model(std::ostream& out, const ModelParams& params);
ModelParams read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);

// Writes through a temporary sibling file and renames it into place, so a
// failed writer never leaves a partial file at `path`.
void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& writer,
                           bool binary = false);

}  // namespace npad
