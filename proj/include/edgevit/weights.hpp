#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "edgevit/tensor.hpp"

namespace edgevit {

/// Insertion-ordered map from parameter name to tensor.
class WeightStore {
 public:
  /// Throws ArgumentError if the name already exists.
  void insert(std::string name, Tensor value);
  void insert_or_assign(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.contains(name); }
  /// Throws MissingParameterError naming the parameter.
  const Tensor& get(const std::string& name) const;
  Tensor& get_mut(const std::string& name);
  bool erase(const std::string& name);

  std::size_t size() const noexcept { return entries_.size(); }
  std::int64_t total_elements() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }

  bool bitwise_equal(const WeightStore& other) const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Weight file: "EVWT", u32 version (1), u32 entry count; per entry u16 name
// length + UTF-8 name, u8 dtype (0 = f32), u8 rank, rank x u32 extents, f32
// payload. All integers little-endian.
inline constexpr std::uint32_t kWeightFileVersion = 1;

void write_weights(std::ostream& os, const WeightStore& store);
WeightStore read_weights(std::istream& is);

void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace edgevit
