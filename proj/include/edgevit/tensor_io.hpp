#pragma once

#include <filesystem>
#include <iosfwd>

#include "edgevit/tensor.hpp"

namespace edgevit {

// Raw tensor file: "EVTS", u32 version (1), u8 rank, rank x u32 extents,
// then the row-major f32 payload. All fields little-endian.
inline constexpr std::uint32_t kTensorFileVersion = 1;

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace edgevit
