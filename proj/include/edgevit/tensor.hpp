#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace edgevit {

using Shape = std::vector<std::int64_t>;

std::string shape_to_string(const Shape& shape);
std::int64_t shape_numel(const Shape& shape);

/// Dense row-major f32 tensor. Feature maps are rank-4 NHWC with channels
/// innermost: element (n,h,w,c) lives at ((n*H + h)*W + w)*C + c.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
  static Tensor full(Shape shape, float value) { return Tensor(std::move(shape), value); }
  /// Rank-2 convenience for literals in tests and small weights.
  static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::int64_t rank() const noexcept { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t numel() const noexcept { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  const float* raw() const noexcept { return data_.data(); }
  float* raw() noexcept { return data_.data(); }

  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }

  // NHWC accessors; shape must be rank 4.
  float at(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) const;
  float& at(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c);
  /// Pointer to the channel vector at (n,h,w) of an NHWC map.
  const float* pixel(std::int64_t n, std::int64_t h, std::int64_t w) const {
    return data_.data() + ((n * shape_[1] + h) * shape_[2] + w) * shape_[3];
  }
  float* pixel(std::int64_t n, std::int64_t h, std::int64_t w) {
    return data_.data() + ((n * shape_[1] + h) * shape_[2] + w) * shape_[3];
  }
  // Rank-2 accessors.
  float at(std::int64_t i, std::int64_t j) const;
  float& at(std::int64_t i, std::int64_t j);

  Tensor reshape(Shape shape) const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  /// Bitwise equality of shape and payload.
  bool bitwise_equal(const Tensor& other) const noexcept;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Extents of an NHWC feature map.
struct Nhwc {
  std::int64_t n, h, w, c;
};
Nhwc nhwc_of(const Tensor& x);

enum class BinaryOp { kAdd, kMul };

Tensor elementwise(const Tensor& a, const Tensor& b, BinaryOp op);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor map(const Tensor& x, const std::function<float(float)>& f);

/// c[i,j] = sum_t a[i,t] * b[t,j].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

Tensor pad2d(const Tensor& x, std::int64_t top, std::int64_t bottom, std::int64_t left,
             std::int64_t right, float value = 0.0f);
/// Spatial slice [h0, h0+h) x [w0, w0+w) of an NHWC map.
Tensor crop2d(const Tensor& x, std::int64_t h0, std::int64_t w0, std::int64_t h, std::int64_t w);

float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace edgevit
