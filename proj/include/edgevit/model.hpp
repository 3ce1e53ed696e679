#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "edgevit/lgl.hpp"
#include "edgevit/tensor.hpp"
#include "edgevit/weights.hpp"

namespace edgevit {

inline constexpr std::size_t kNumStages = 4;
using StageArray = std::array<std::int64_t, kNumStages>;

/// Architecture of a four-stage model: a 4x4/stride-4 stem, 2x2/stride-2
/// downsamplers between stages, stacked LGL blocks, and a
/// LayerNorm -> average pool -> linear classifier head.
struct VariantSpec {
  std::string name = "custom";
  StageArray channels{};
  StageArray blocks{};
  StageArray heads{};
  StageArray sample_rates{4, 2, 2, 1};
  std::int64_t in_channels = 3;
  std::int64_t num_classes = 1000;
  std::int64_t input_size = 224;
  std::int64_t stem_kernel = 4;
  std::int64_t downsample_kernel = 2;
  std::int64_t local_kernel = 3;
  std::int64_t ffn_ratio = 4;
  lgl::Sampler sampler = lgl::Sampler::kCenter;
  lgl::Propagation propagation = lgl::Propagation::kTransposedConv;
  lgl::AttnMode attn_mode = lgl::AttnMode::kSparse;
  bool dual_cpe = true;
  bool shared_ffn = false;
  lgl::LocalBranch local_branch = lgl::LocalBranch::kSkipAtFullRate;

  void validate() const;
  lgl::LglConfig block_config(std::size_t stage) const;
};

/// xxs, xs or s. Throws ConfigError for other names.
VariantSpec build_variant(const std::string& name);

enum class ParamInit { kUniform, kZero, kOne };

struct ParamInfo {
  std::string name;
  Shape shape;
  std::int64_t fan_in;
  ParamInit init;
};

/// Every parameter the variant needs, in a fixed order, named
/// stage{i}.embed.*, stage{i}.block{j}.{component}.{param}, head.*.
/// Stages and blocks are numbered from 1.
std::vector<ParamInfo> parameter_layout(const VariantSpec& spec);

/// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases 0, LayerNorm gamma 1
/// and beta 0. Deterministic for a fixed seed.
WeightStore init_params(const VariantSpec& spec, std::uint64_t seed);

/// Zeroes every LGL block parameter except LayerNorm gamma (set to 1), so
/// each residual branch contributes exactly 0. Patch embeddings and the head
/// are left untouched.
void zero_branch_params(const VariantSpec& spec, WeightStore& store);

struct ForwardTrace {
  std::vector<Shape> stage_shapes;  // NHWC output of each stage
  std::vector<Shape> block_shapes;
};

/// Weights bound to a spec. Binding resolves and shape-checks every
/// parameter name up front.
class Model {
 public:
  Model(VariantSpec spec, const WeightStore& weights);

  const VariantSpec& spec() const noexcept { return spec_; }

  /// x is [N, H, W, in_channels]; returns logits [N, num_classes].
  Tensor forward(const Tensor& x, ForwardTrace* trace = nullptr) const;

  /// Stem and downsamplers only, then the head; LGL blocks omitted.
  Tensor forward_without_blocks(const Tensor& x) const;

  /// stage is 0-based; output of the patch embedding before any block.
  Tensor embed(std::size_t stage, const Tensor& x) const;
  Tensor block(std::size_t stage, std::size_t index, const Tensor& x) const;
  Tensor head(const Tensor& features) const;

 private:
  struct Stage {
    nn::Conv2dParams embed;
    lgl::LglConfig config;
    std::vector<lgl::LglBlockParams> blocks;
  };

  VariantSpec spec_;
  std::vector<Stage> stages_;
  nn::LayerNormParams head_norm_;
  nn::LinearParams head_fc_;
};

/// Binds and runs in one call; throws MissingParameterError as needed.
Tensor forward(const VariantSpec& spec, const WeightStore& weights, const Tensor& x,
               ForwardTrace* trace = nullptr);

/// Uniform [-1, 1) input of shape [1, size, size, in_channels].
Tensor random_input(const VariantSpec& spec, std::int64_t size, std::uint64_t seed);

}  // namespace edgevit
