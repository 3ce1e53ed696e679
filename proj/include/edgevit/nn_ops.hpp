#pragma once

#include <cstdint>
#include <optional>

#include "edgevit/tensor.hpp"

namespace edgevit::nn {

/// Weight layout [kh, kw, Cin/groups, Cout]. groups == Cin is depthwise;
/// a 1x1 kernel with groups == 1 is pointwise.
struct Conv2dParams {
  Tensor weight;
  std::optional<Tensor> bias;
  std::int64_t stride_h = 1, stride_w = 1;
  std::int64_t pad_h = 0, pad_w = 0;
  std::int64_t groups = 1;

  std::int64_t kernel_h() const { return weight.dim(0); }
  std::int64_t kernel_w() const { return weight.dim(1); }
  std::int64_t in_per_group() const { return weight.dim(2); }
  std::int64_t out_channels() const { return weight.dim(3); }
};

struct AttnParams {
  Tensor wq, wk, wv, wo;  // each [C, C]
  std::optional<Tensor> bq, bk, bv, bo;
  std::int64_t heads = 1;

  std::int64_t channels() const { return wq.dim(0); }
  float scale() const;
};

struct LayerNormParams {
  Tensor gamma, beta;
  float epsilon = 1e-6f;
};

struct LinearParams {
  Tensor weight;  // [Cin, Cout]
  std::optional<Tensor> bias;
};

enum class ConvAlgo {
  kAuto,    // im2col + matmul for ungrouped convolutions, direct otherwise
  kDirect,  // nested loops over the output, the verification path
  kIm2col,
};

Tensor conv2d(const Tensor& x, const Conv2dParams& p, ConvAlgo algo = ConvAlgo::kAuto);

/// Depthwise transposed convolution whose kernel equals its stride, so each
/// input pixel writes a disjoint r x r output block. weight is [r, r, C].
Tensor transposed_depthwise_conv2d(const Tensor& x, const Tensor& weight,
                                   const std::optional<Tensor>& bias, std::int64_t stride);

/// Normalizes over the last axis (channels) with population variance.
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

/// x * Phi(x), exact erf form.
float gelu(float x);
Tensor gelu(const Tensor& x);

/// Max-subtracted softmax along the last axis.
Tensor softmax(const Tensor& x);

/// Affine map over the last axis; leading axes are preserved.
Tensor linear(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias);
Tensor linear(const Tensor& x, const LinearParams& p);

/// Multi-head attention with separate query and key/value token sets.
/// tokens arguments are [T, C]; output is [Tq, C].
Tensor attention(const Tensor& queries, const Tensor& keys_values, const AttnParams& p);

/// Standard self-attention: attention(tokens, tokens, p).
Tensor mhsa(const Tensor& tokens, const AttnParams& p);

/// Bilinear upsampling by an integer factor with half-pixel centers
/// (source = (i + 0.5)/r - 0.5, clamped at the borders).
Tensor bilinear_upsample(const Tensor& x, std::int64_t factor);

}  // namespace edgevit::nn
