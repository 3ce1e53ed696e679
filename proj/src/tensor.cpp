#include "edgevit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "edgevit/errors.hpp"
#include "edgevit/parallel.hpp"

namespace edgevit {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

void check_extents(const Shape& shape) {
  for (auto e : shape) {
    if (e < 1) throw DimensionError("tensor extents must be >= 1, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<float>> rows) {
  const auto m = static_cast<std::int64_t>(rows.size());
  const auto n = m ? static_cast<std::int64_t>(rows.begin()->size()) : 0;
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(m * n));
  for (const auto& r : rows) {
    if (static_cast<std::int64_t>(r.size()) != n) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({m, n}, std::move(data));
}

std::int64_t Tensor::dim(std::int64_t axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw DimensionError("axis out of range for shape " + shape_to_string(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

float Tensor::at(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) const {
  return data_[static_cast<std::size_t>(((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c)];
}

float& Tensor::at(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) {
  return data_[static_cast<std::size_t>(((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c)];
}

float Tensor::at(std::int64_t i, std::int64_t j) const {
  return data_[static_cast<std::size_t>(i * shape_[1] + j)];
}

float& Tensor::at(std::int64_t i, std::int64_t j) {
  return data_[static_cast<std::size_t>(i * shape_[1] + j)];
}

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                         shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::bitwise_equal(const Tensor& other) const noexcept {
  return shape_ == other.shape_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

Nhwc nhwc_of(const Tensor& x) {
  if (x.rank() != 4) throw DimensionError("expected NHWC tensor, got " + shape_to_string(x.shape()));
  return {x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]};
}

Tensor elementwise(const Tensor& a, const Tensor& b, BinaryOp op) {
  if (!a.same_shape(b)) {
    throw DimensionError("elementwise shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  Tensor out(a.shape());
  const float* pa = a.raw();
  const float* pb = b.raw();
  float* po = out.raw();
  const auto n = a.numel();
  if (op == BinaryOp::kAdd) {
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  } else {
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::kAdd); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::kMul); }

Tensor map(const Tensor& x, const std::function<float(float)>& f) {
  Tensor out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul shape mismatch: " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  const auto m = a.shape()[0];
  const auto k = a.shape()[1];
  const auto n = b.shape()[1];
  Tensor c({m, n});
  const float* pa = a.raw();
  const float* pb = b.raw();
  float* pc = c.raw();
  // i-t-j order keeps the inner loop contiguous over b and c rows.
  parallel_for(0, m, [&](std::int64_t i0, std::int64_t i1) {
    for (std::int64_t i = i0; i < i1; ++i) {
      float* crow = pc + i * n;
      const float* arow = pa + i * k;
      for (std::int64_t t = 0; t < k; ++t) {
        const float av = arow[t];
        const float* brow = pb + t * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
  return c;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose2d expects rank 2, got " + shape_to_string(a.shape()));
  const auto m = a.shape()[0];
  const auto n = a.shape()[1];
  Tensor t({n, m});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor pad2d(const Tensor& x, std::int64_t top, std::int64_t bottom, std::int64_t left,
             std::int64_t right, float value) {
  if (top < 0 || bottom < 0 || left < 0 || right < 0) {
    throw DimensionError("pad2d counts must be non-negative");
  }
  const auto s = nhwc_of(x);
  const auto oh = s.h + top + bottom;
  const auto ow = s.w + left + right;
  Tensor out({s.n, oh, ow, s.c}, value);
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t h = 0; h < s.h; ++h) {
      const float* src = &x.raw()[((n * s.h + h) * s.w) * s.c];
      float* dst = &out.raw()[((n * oh + h + top) * ow + left) * s.c];
      std::copy(src, src + s.w * s.c, dst);
    }
  return out;
}

Tensor crop2d(const Tensor& x, std::int64_t h0, std::int64_t w0, std::int64_t h, std::int64_t w) {
  const auto s = nhwc_of(x);
  if (h0 < 0 || w0 < 0 || h < 1 || w < 1 || h0 + h > s.h || w0 + w > s.w) {
    throw DimensionError("crop2d window out of range for " + shape_to_string(x.shape()));
  }
  Tensor out({s.n, h, w, s.c});
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t i = 0; i < h; ++i) {
      const float* src = &x.raw()[((n * s.h + h0 + i) * s.w + w0) * s.c];
      float* dst = &out.raw()[((n * h + i) * w) * s.c];
      std::copy(src, src + w * s.c, dst);
    }
  return out;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  float m = 0.0f;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace edgevit
