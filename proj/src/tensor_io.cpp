#include "edgevit/tensor_io.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace edgevit {

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write("EVTS", 4);
  detail::put_le<std::uint32_t>(os, kTensorFileVersion);
  detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
  for (auto e : t.shape()) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
  for (float v : t.data()) detail::put_f32(os, v);
}

Tensor read_tensor(std::istream& is) {
  detail::expect_magic(is, "EVTS");
  const auto version = detail::get_le<std::uint32_t>(is, "version");
  if (version != kTensorFileVersion) {
    throw FormatError("unsupported tensor file version " + std::to_string(version));
  }
  const auto rank = detail::get_le<std::uint8_t>(is, "rank");
  if (rank == 0) throw FormatError("tensor rank must be >= 1");
  Shape shape(rank);
  for (auto& e : shape) {
    e = detail::get_le<std::uint32_t>(is, "extent");
    if (e == 0) throw FormatError("tensor extent of zero");
  }
  std::vector<float> data(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : data) v = detail::get_f32(is);
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  write_tensor(os, t);
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  return read_tensor(is);
}

}  // namespace edgevit
