#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "edgevit/errors.hpp"

namespace edgevit::detail {

template <typename U>
void put_le(std::ostream& os, U value) {
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffu);
  }
  os.write(buf.data(), buf.size());
}

template <typename U>
U get_le(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(U)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw FormatError(std::string("truncated input while reading ") + what);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<U>(v);
}

inline void put_f32(std::ostream& os, float f) { put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(std::istream& is) {
  return std::bit_cast<float>(get_le<std::uint32_t>(is, "f32 payload"));
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char buf[4]{};
  is.read(buf, 4);
  if (is.gcount() != 4 || std::memcmp(buf, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

}  // namespace edgevit::detail
