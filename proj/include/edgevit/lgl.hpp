#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "edgevit/nn_ops.hpp"
#include "edgevit/tensor.hpp"

namespace edgevit::lgl {

enum class Sampler { kCenter, kAvg, kMax };
enum class Propagation { kTransposedConv, kBilinear, kNone };
/// kSparse: attention among delegates only, followed by propagation.
/// kKvDownsampled: every grid token queries the delegate keys/values, so no
/// propagation step exists (the "without local propagation" ablation).
enum class AttnMode { kSparse, kKvDownsampled };
/// Whether the local half of the block (CPE, LocalAgg and its FFN) runs in
/// blocks whose sample rate is 1.
enum class LocalBranch { kAlways, kSkipAtFullRate };

std::string_view to_string(Sampler s);
std::string_view to_string(Propagation p);
std::string_view to_string(AttnMode m);
std::string_view to_string(LocalBranch b);
Sampler parse_sampler(std::string_view s);
Propagation parse_propagation(std::string_view s);
AttnMode parse_attn_mode(std::string_view s);
LocalBranch parse_local_branch(std::string_view s);

struct LglConfig {
  std::int64_t channels = 0;
  std::int64_t heads = 1;
  std::int64_t local_kernel = 3;
  std::int64_t sample_rate = 1;
  std::int64_t ffn_ratio = 4;
  Sampler sampler = Sampler::kCenter;
  Propagation propagation = Propagation::kTransposedConv;
  AttnMode attn_mode = AttnMode::kSparse;
  bool dual_cpe = true;     // CPE before LocalAgg as well as before attention
  bool shared_ffn = false;  // both FFNs read the same parameters
  LocalBranch local_branch = LocalBranch::kSkipAtFullRate;

  bool has_local_branch() const {
    return local_branch == LocalBranch::kAlways || sample_rate > 1;
  }
  bool has_cpe1() const { return has_local_branch() && dual_cpe; }
  bool has_local_prop_params() const {
    return attn_mode == AttnMode::kSparse && propagation == Propagation::kTransposedConv;
  }
  std::int64_t ffn_hidden() const { return ffn_ratio * channels; }

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

struct LocalAggParams {
  nn::Conv2dParams pw1;  // 1x1, C -> C
  nn::Conv2dParams dw;   // k x k depthwise, padded to preserve shape
  nn::Conv2dParams pw2;  // 1x1, C -> C
};

struct FfnParams {
  nn::LinearParams fc1;  // C -> hidden
  nn::LinearParams fc2;  // hidden -> C
};

struct LocalPropParams {
  Tensor weight;  // [r, r, C]
  std::optional<Tensor> bias;
};

/// Parameters for one block. Members tied to the local branch or to
/// transposed-conv propagation are empty when the config omits them.
struct LglBlockParams {
  std::optional<nn::Conv2dParams> cpe1;
  std::optional<nn::LayerNormParams> norm1, norm2;
  std::optional<LocalAggParams> local_agg;
  std::optional<FfnParams> ffn1;
  nn::Conv2dParams cpe2;
  nn::LayerNormParams norm3, norm4;
  nn::AttnParams attn;
  std::optional<LocalPropParams> local_prop;
  FfnParams ffn2;
};

/// x + depthwise3x3(x).
Tensor cpe(const Tensor& x, const nn::Conv2dParams& p);

/// pointwise -> depthwise k x k -> pointwise; the caller adds the residual.
Tensor local_agg(const Tensor& x, const LocalAggParams& p);

/// Extents an input is zero-padded to before sampling at rate r.
std::int64_t padded_extent(std::int64_t extent, std::int64_t r);

/// One delegate per r x r window: [N, ceil(H/r), ceil(W/r), C]. Inputs whose
/// extents are not multiples of r are zero-padded bottom/right first.
Tensor sample_delegates(const Tensor& x, std::int64_t r, Sampler sampler);

/// Self-attention over the delegate grid as one token sequence per image.
Tensor delegate_attention(const Tensor& delegates, const nn::AttnParams& p);

/// sample_delegates followed by delegate_attention. Output has the delegate
/// grid shape.
Tensor global_sparse_attn(const Tensor& x, const LglConfig& cfg, const nn::AttnParams& p);

/// All grid tokens attend to the sampled delegates. Output has x's shape.
Tensor kv_downsampled_attn(const Tensor& x, const LglConfig& cfg, const nn::AttnParams& p);

/// Spreads delegate outputs back to an out_h x out_w grid.
Tensor local_prop(const Tensor& delegates, const LglConfig& cfg, const LocalPropParams* p,
                  std::int64_t out_h, std::int64_t out_w);

/// fc1 -> GeLU -> fc2 over the last axis.
Tensor ffn(const Tensor& x, const FfnParams& p);

/// Full Local-Global-Local block:
///   x0 = cpe1(x_in);  X  = LocalAgg(Norm1(x0)) + x0;  X' = FFN1(Norm2(X)) + X
///   x1 = cpe2(X');    Z  = LocalProp(GlobalSparseAttn(Norm3(x1))) + x1
///   out = FFN2(Norm4(Z)) + Z
/// The first line is skipped when cfg.has_local_branch() is false.
Tensor lgl_block(const Tensor& x_in, const LglBlockParams& params, const LglConfig& cfg);

/// Same block with the delegate attention replaced by full-grid MHSA; used as
/// the reference the r = 1 sparse path is checked against.
Tensor lgl_block_full_attention(const Tensor& x_in, const LglBlockParams& params,
                                const LglConfig& cfg);

}  // namespace edgevit::lgl
