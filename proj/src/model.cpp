#include "edgevit/model.hpp"

#include <cmath>
#include <random>

#include "edgevit/errors.hpp"

namespace edgevit {

namespace {

std::string stage_prefix(std::size_t stage) { return "stage" + std::to_string(stage + 1); }

std::string block_prefix(std::size_t stage, std::size_t block) {
  return stage_prefix(stage) + ".block" + std::to_string(block + 1);
}

// Uniform [0, 1) from the top 24 bits, identical on every standard library.
float unit_uniform(std::mt19937_64& rng) {
  return static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f);
}

}  // namespace

void VariantSpec::validate() const {
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (channels[i] < 1) throw ConfigError("stage channels must be >= 1");
    if (blocks[i] < 0) throw ConfigError("stage block counts must be >= 0");
    if (i > 0 && channels[i] < channels[i - 1]) {
      throw ConfigError("stage channels must be nondecreasing");
    }
    if (heads[i] < 1 || channels[i] % heads[i] != 0) {
      throw ConfigError("stage " + std::to_string(i + 1) + ": heads " + std::to_string(heads[i]) +
                        " must divide channels " + std::to_string(channels[i]));
    }
    if (sample_rates[i] < 1) throw ConfigError("sample rates must be >= 1");
    block_config(i).validate();
  }
  if (in_channels < 1 || num_classes < 1 || input_size < 1) {
    throw ConfigError("in_channels, num_classes and input_size must be >= 1");
  }
  if (stem_kernel < 1 || downsample_kernel < 1) throw ConfigError("patch kernels must be >= 1");
}

lgl::LglConfig VariantSpec::block_config(std::size_t stage) const {
  lgl::LglConfig c;
  c.channels = channels[stage];
  c.heads = heads[stage];
  c.local_kernel = local_kernel;
  c.sample_rate = sample_rates[stage];
  c.ffn_ratio = ffn_ratio;
  c.sampler = sampler;
  c.propagation = propagation;
  c.attn_mode = attn_mode;
  c.dual_cpe = dual_cpe;
  c.shared_ffn = shared_ffn;
  c.local_branch = local_branch;
  return c;
}

VariantSpec build_variant(const std::string& name) {
  VariantSpec s;
  s.name = name;
  s.heads = {1, 2, 4, 8};
  if (name == "xxs") {
    s.channels = {36, 72, 144, 288};
    s.blocks = {1, 1, 3, 2};
  } else if (name == "xs") {
    s.channels = {48, 96, 240, 384};
    s.blocks = {1, 1, 2, 2};
  } else if (name == "s") {
    s.channels = {48, 96, 240, 384};
    s.blocks = {1, 2, 3, 2};
  } else {
    throw ConfigError("unknown variant '" + name + "' (xxs|xs|s)");
  }
  return s;
}

std::vector<ParamInfo> parameter_layout(const VariantSpec& spec) {
  spec.validate();
  std::vector<ParamInfo> out;
  auto weight = [&](std::string name, Shape shape, std::int64_t fan_in) {
    out.push_back({std::move(name), std::move(shape), fan_in, ParamInit::kUniform});
  };
  auto bias = [&](std::string name, std::int64_t n) {
    out.push_back({std::move(name), {n}, 0, ParamInit::kZero});
  };
  auto conv = [&](const std::string& p, std::int64_t k, std::int64_t cin_pg, std::int64_t cout) {
    weight(p + ".weight", {k, k, cin_pg, cout}, k * k * cin_pg);
    bias(p + ".bias", cout);
  };
  auto lin = [&](const std::string& p, std::int64_t cin, std::int64_t cout) {
    weight(p + ".weight", {cin, cout}, cin);
    bias(p + ".bias", cout);
  };
  auto norm = [&](const std::string& p, std::int64_t c) {
    out.push_back({p + ".gamma", {c}, 0, ParamInit::kOne});
    out.push_back({p + ".beta", {c}, 0, ParamInit::kZero});
  };

  std::int64_t cin = spec.in_channels;
  for (std::size_t s = 0; s < kNumStages; ++s) {
    const auto c = spec.channels[s];
    const auto k = s == 0 ? spec.stem_kernel : spec.downsample_kernel;
    conv(stage_prefix(s) + ".embed", k, cin, c);
    const auto cfg = spec.block_config(s);
    for (std::int64_t b = 0; b < spec.blocks[s]; ++b) {
      const auto p = block_prefix(s, static_cast<std::size_t>(b));
      if (cfg.has_local_branch()) {
        if (cfg.dual_cpe) conv(p + ".cpe1", 3, 1, c);
        norm(p + ".norm1", c);
        conv(p + ".local_agg.pw1", 1, c, c);
        conv(p + ".local_agg.dw", cfg.local_kernel, 1, c);
        conv(p + ".local_agg.pw2", 1, c, c);
        norm(p + ".norm2", c);
        lin(p + ".ffn1.fc1", c, cfg.ffn_hidden());
        lin(p + ".ffn1.fc2", cfg.ffn_hidden(), c);
      }
      conv(p + ".cpe2", 3, 1, c);
      norm(p + ".norm3", c);
      for (const char* proj : {"q", "k", "v", "o"}) lin(p + ".attn." + proj, c, c);
      if (cfg.has_local_prop_params()) {
        const auto r = cfg.sample_rate;
        weight(p + ".local_prop.weight", {r, r, c}, r * r);
        bias(p + ".local_prop.bias", c);
      }
      norm(p + ".norm4", c);
      if (!(cfg.shared_ffn && cfg.has_local_branch())) {
        lin(p + ".ffn2.fc1", c, cfg.ffn_hidden());
        lin(p + ".ffn2.fc2", cfg.ffn_hidden(), c);
      }
    }
    cin = c;
  }
  norm("head.norm", cin);
  lin("head.fc", cin, spec.num_classes);
  return out;
}

WeightStore init_params(const VariantSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightStore store;
  for (const auto& info : parameter_layout(spec)) {
    Tensor t(info.shape);
    switch (info.init) {
      case ParamInit::kZero: break;
      case ParamInit::kOne:
        for (auto& v : t.data()) v = 1.0f;
        break;
      case ParamInit::kUniform: {
        const float bound = std::sqrt(1.0f / static_cast<float>(info.fan_in));
        for (auto& v : t.data()) v = (2.0f * unit_uniform(rng) - 1.0f) * bound;
        break;
      }
    }
    store.insert(info.name, std::move(t));
  }
  return store;
}

void zero_branch_params(const VariantSpec& spec, WeightStore& store) {
  for (const auto& info : parameter_layout(spec)) {
    if (info.name.find(".block") == std::string::npos) continue;
    const float value = info.init == ParamInit::kOne ? 1.0f : 0.0f;
    for (auto& v : store.get_mut(info.name).data()) v = value;
  }
}

namespace {

class Binder {
 public:
  explicit Binder(const WeightStore& w) : w_(w) {}

  Tensor tensor(const std::string& name, const Shape& shape) const {
    const Tensor& t = w_.get(name);
    if (t.shape() != shape) {
      throw DimensionError("parameter " + name + " has shape " + shape_to_string(t.shape()) +
                           ", expected " + shape_to_string(shape));
    }
    return t;
  }

  nn::Conv2dParams conv(const std::string& p, std::int64_t k, std::int64_t cin_pg,
                        std::int64_t cout, std::int64_t stride, std::int64_t pad,
                        std::int64_t groups) const {
    nn::Conv2dParams c;
    c.weight = tensor(p + ".weight", {k, k, cin_pg, cout});
    c.bias = tensor(p + ".bias", {cout});
    c.stride_h = c.stride_w = stride;
    c.pad_h = c.pad_w = pad;
    c.groups = groups;
    return c;
  }

  nn::LinearParams linear(const std::string& p, std::int64_t cin, std::int64_t cout) const {
    return {tensor(p + ".weight", {cin, cout}), tensor(p + ".bias", {cout})};
  }

  nn::LayerNormParams norm(const std::string& p, std::int64_t c) const {
    return {tensor(p + ".gamma", {c}), tensor(p + ".beta", {c}), 1e-6f};
  }

  lgl::FfnParams ffn(const std::string& p, std::int64_t c, std::int64_t hidden) const {
    return {linear(p + ".fc1", c, hidden), linear(p + ".fc2", hidden, c)};
  }

 private:
  const WeightStore& w_;
};

Tensor pad_to_multiple(const Tensor& x, std::int64_t m) {
  const auto s = nhwc_of(x);
  const auto ph = lgl::padded_extent(s.h, m);
  const auto pw = lgl::padded_extent(s.w, m);
  if (ph == s.h && pw == s.w) return x;
  return pad2d(x, 0, ph - s.h, 0, pw - s.w, 0.0f);
}

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context) {
  throw Error(e.kind(), context + ": " + e.what());
}

}  // namespace

Model::Model(VariantSpec spec, const WeightStore& weights) : spec_(std::move(spec)) {
  spec_.validate();
  const Binder bind(weights);
  std::int64_t cin = spec_.in_channels;
  for (std::size_t s = 0; s < kNumStages; ++s) {
    Stage stage;
    const auto c = spec_.channels[s];
    const auto k = s == 0 ? spec_.stem_kernel : spec_.downsample_kernel;
    stage.embed = bind.conv(stage_prefix(s) + ".embed", k, cin, c, k, 0, 1);
    stage.config = spec_.block_config(s);
    const auto& cfg = stage.config;
    for (std::int64_t b = 0; b < spec_.blocks[s]; ++b) {
      const auto p = block_prefix(s, static_cast<std::size_t>(b));
      lgl::LglBlockParams bp;
      if (cfg.has_local_branch()) {
        if (cfg.dual_cpe) bp.cpe1 = bind.conv(p + ".cpe1", 3, 1, c, 1, 1, c);
        bp.norm1 = bind.norm(p + ".norm1", c);
        const auto lk = cfg.local_kernel;
        bp.local_agg = lgl::LocalAggParams{bind.conv(p + ".local_agg.pw1", 1, c, c, 1, 0, 1),
                                           bind.conv(p + ".local_agg.dw", lk, 1, c, 1, lk / 2, c),
                                           bind.conv(p + ".local_agg.pw2", 1, c, c, 1, 0, 1)};
        bp.norm2 = bind.norm(p + ".norm2", c);
        bp.ffn1 = bind.ffn(p + ".ffn1", c, cfg.ffn_hidden());
      }
      bp.cpe2 = bind.conv(p + ".cpe2", 3, 1, c, 1, 1, c);
      bp.norm3 = bind.norm(p + ".norm3", c);
      bp.attn.heads = cfg.heads;
      bp.attn.wq = bind.tensor(p + ".attn.q.weight", {c, c});
      bp.attn.bq = bind.tensor(p + ".attn.q.bias", {c});
      bp.attn.wk = bind.tensor(p + ".attn.k.weight", {c, c});
      bp.attn.bk = bind.tensor(p + ".attn.k.bias", {c});
      bp.attn.wv = bind.tensor(p + ".attn.v.weight", {c, c});
      bp.attn.bv = bind.tensor(p + ".attn.v.bias", {c});
      bp.attn.wo = bind.tensor(p + ".attn.o.weight", {c, c});
      bp.attn.bo = bind.tensor(p + ".attn.o.bias", {c});
      if (cfg.has_local_prop_params()) {
        const auto r = cfg.sample_rate;
        bp.local_prop = lgl::LocalPropParams{bind.tensor(p + ".local_prop.weight", {r, r, c}),
                                             bind.tensor(p + ".local_prop.bias", {c})};
      }
      bp.norm4 = bind.norm(p + ".norm4", c);
      if (cfg.shared_ffn && cfg.has_local_branch()) {
        bp.ffn2 = *bp.ffn1;
      } else {
        bp.ffn2 = bind.ffn(p + ".ffn2", c, cfg.ffn_hidden());
      }
      stage.blocks.push_back(std::move(bp));
    }
    stages_.push_back(std::move(stage));
    cin = c;
  }
  head_norm_ = bind.norm("head.norm", cin);
  head_fc_ = bind.linear("head.fc", cin, spec_.num_classes);
}

Tensor Model::embed(std::size_t stage, const Tensor& x) const {
  const auto& st = stages_.at(stage);
  return nn::conv2d(pad_to_multiple(x, st.embed.stride_h), st.embed);
}

Tensor Model::block(std::size_t stage, std::size_t index, const Tensor& x) const {
  const auto& st = stages_.at(stage);
  try {
    return lgl::lgl_block(x, st.blocks.at(index), st.config);
  } catch (const Error& e) {
    rethrow_with_context(e, block_prefix(stage, index));
  }
}

Tensor Model::head(const Tensor& features) const {
  const auto s = nhwc_of(features);
  const Tensor normed = nn::layer_norm(features, head_norm_);
  Tensor pooled({s.n, s.c});
  const auto tokens = s.h * s.w;
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t t = 0; t < tokens; ++t) {
      const float* src = normed.raw() + (n * tokens + t) * s.c;
      for (std::int64_t c = 0; c < s.c; ++c) pooled.at(n, c) += src[c];
    }
    for (std::int64_t c = 0; c < s.c; ++c) pooled.at(n, c) /= static_cast<float>(tokens);
  }
  return nn::linear(pooled, head_fc_);
}

Tensor Model::forward(const Tensor& x, ForwardTrace* trace) const {
  if (trace) *trace = ForwardTrace{};
  const auto s = nhwc_of(x);
  if (s.c != spec_.in_channels) {
    throw DimensionError("model expects " + std::to_string(spec_.in_channels) +
                         " input channels, got " + shape_to_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t st = 0; st < stages_.size(); ++st) {
    try {
      h = embed(st, h);
    } catch (const Error& e) {
      rethrow_with_context(e, stage_prefix(st) + ".embed");
    }
    for (std::size_t b = 0; b < stages_[st].blocks.size(); ++b) {
      h = block(st, b, h);
      if (trace) trace->block_shapes.push_back(h.shape());
    }
    if (trace) trace->stage_shapes.push_back(h.shape());
  }
  return head(h);
}

Tensor Model::forward_without_blocks(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t st = 0; st < stages_.size(); ++st) h = embed(st, h);
  return head(h);
}

Tensor forward(const VariantSpec& spec, const WeightStore& weights, const Tensor& x,
               ForwardTrace* trace) {
  return Model(spec, weights).forward(x, trace);
}

Tensor random_input(const VariantSpec& spec, std::int64_t size, std::uint64_t seed) {
  // Offset keeps the input stream distinct from init_params with the same seed.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Tensor x({1, size, size, spec.in_channels});
  for (auto& v : x.data()) v = 2.0f * unit_uniform(rng) - 1.0f;
  return x;
}

}  // namespace edgevit
