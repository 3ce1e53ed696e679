#include "edgevit/weights.hpp"

#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "edgevit/errors.hpp"

namespace edgevit {

void WeightStore::insert(std::string name, Tensor value) {
  if (index_.contains(name)) throw ArgumentError("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

void WeightStore::insert_or_assign(const std::string& name, Tensor value) {
  if (auto it = index_.find(name); it != index_.end()) {
    entries_[it->second].second = std::move(value);
  } else {
    insert(name, std::move(value));
  }
}

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw MissingParameterError(name);
  return entries_[it->second].second;
}

Tensor& WeightStore::get_mut(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw MissingParameterError(name);
  return entries_[it->second].second;
}

bool WeightStore::erase(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) return false;
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(it->second));
  index_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].first, i);
  return true;
}

std::int64_t WeightStore::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

bool WeightStore::bitwise_equal(const WeightStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (!entries_[i].second.bitwise_equal(other.entries_[i].second)) return false;
  }
  return true;
}

void write_weights(std::ostream& os, const WeightStore& store) {
  os.write("EVWT", 4);
  detail::put_le<std::uint32_t>(os, kWeightFileVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store.entries()) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw FormatError("parameter name too long: " + name.substr(0, 64));
    }
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint8_t>(os, 0);
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
    for (float v : t.data()) detail::put_f32(os, v);
  }
}

WeightStore read_weights(std::istream& is) {
  detail::expect_magic(is, "EVWT");
  const auto version = detail::get_le<std::uint32_t>(is, "version");
  if (version != kWeightFileVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version));
  }
  const auto count = detail::get_le<std::uint32_t>(is, "entry count");
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::get_le<std::uint16_t>(is, "name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (is.gcount() != len) throw FormatError("truncated input while reading parameter name");
    const auto dtype = detail::get_le<std::uint8_t>(is, "dtype");
    if (dtype != 0) throw FormatError("unsupported dtype " + std::to_string(dtype) + " for " + name);
    const auto rank = detail::get_le<std::uint8_t>(is, "rank");
    if (rank == 0) throw FormatError("rank 0 entry: " + name);
    Shape shape(rank);
    for (auto& e : shape) {
      e = detail::get_le<std::uint32_t>(is, "extent");
      if (e == 0) throw FormatError("zero extent in " + name);
    }
    std::vector<float> data(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : data) v = detail::get_f32(is);
    if (store.contains(name)) throw FormatError("duplicate parameter name in weight file: " + name);
    store.insert(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  write_weights(os, store);
  if (!os) throw IoError("write failed: " + path.string());
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  return read_weights(is);
}

}  // namespace edgevit
