#include "edgevit/lgl.hpp"

#include <algorithm>
#include <limits>

#include "edgevit/errors.hpp"

namespace edgevit::lgl {

std::string_view to_string(Sampler s) {
  switch (s) {
    case Sampler::kCenter: return "center";
    case Sampler::kAvg: return "avg";
    case Sampler::kMax: return "max";
  }
  return "?";
}

std::string_view to_string(Propagation p) {
  switch (p) {
    case Propagation::kTransposedConv: return "transposed";
    case Propagation::kBilinear: return "bilinear";
    case Propagation::kNone: return "none";
  }
  return "?";
}

std::string_view to_string(AttnMode m) {
  return m == AttnMode::kSparse ? "sparse" : "kv_downsampled";
}

std::string_view to_string(LocalBranch b) {
  return b == LocalBranch::kAlways ? "always" : "skip_at_full_rate";
}

Sampler parse_sampler(std::string_view s) {
  if (s == "center") return Sampler::kCenter;
  if (s == "avg") return Sampler::kAvg;
  if (s == "max") return Sampler::kMax;
  throw ConfigError("unknown sampler '" + std::string(s) + "' (center|avg|max)");
}

Propagation parse_propagation(std::string_view s) {
  if (s == "transposed" || s == "transposed_conv") return Propagation::kTransposedConv;
  if (s == "bilinear") return Propagation::kBilinear;
  if (s == "none") return Propagation::kNone;
  throw ConfigError("unknown propagation '" + std::string(s) + "' (transposed|bilinear|none)");
}

AttnMode parse_attn_mode(std::string_view s) {
  if (s == "sparse") return AttnMode::kSparse;
  if (s == "kv_downsampled") return AttnMode::kKvDownsampled;
  throw ConfigError("unknown attention mode '" + std::string(s) + "' (sparse|kv_downsampled)");
}

LocalBranch parse_local_branch(std::string_view s) {
  if (s == "always") return LocalBranch::kAlways;
  if (s == "skip_at_full_rate") return LocalBranch::kSkipAtFullRate;
  throw ConfigError("unknown local branch policy '" + std::string(s) +
                    "' (always|skip_at_full_rate)");
}

void LglConfig::validate() const {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (heads < 1 || channels % heads != 0) {
    throw ConfigError("heads " + std::to_string(heads) + " must divide channels " +
                      std::to_string(channels));
  }
  if (local_kernel < 1 || local_kernel % 2 == 0) {
    throw ConfigError("local kernel must be odd, got " + std::to_string(local_kernel));
  }
  if (sample_rate < 1) throw ConfigError("sample rate must be >= 1");
  if (ffn_ratio < 1) throw ConfigError("ffn ratio must be >= 1");
  if (attn_mode == AttnMode::kSparse && propagation == Propagation::kNone) {
    throw ConfigError("sparse attention needs a propagation step; use kv_downsampled attention "
                      "for the variant without local propagation");
  }
  if (attn_mode == AttnMode::kKvDownsampled && propagation != Propagation::kNone) {
    throw ConfigError("kv_downsampled attention has no propagation step; set propagation none");
  }
}

Tensor cpe(const Tensor& x, const nn::Conv2dParams& p) { return add(x, nn::conv2d(x, p)); }

Tensor local_agg(const Tensor& x, const LocalAggParams& p) {
  return nn::conv2d(nn::conv2d(nn::conv2d(x, p.pw1), p.dw), p.pw2);
}

std::int64_t padded_extent(std::int64_t extent, std::int64_t r) {
  return (extent + r - 1) / r * r;
}

Tensor sample_delegates(const Tensor& x, std::int64_t r, Sampler sampler) {
  if (r < 1) throw ConfigError("sample rate must be >= 1, got " + std::to_string(r));
  const auto s = nhwc_of(x);
  const auto ph = padded_extent(s.h, r);
  const auto pw = padded_extent(s.w, r);
  const Tensor padded = (ph == s.h && pw == s.w) ? x : pad2d(x, 0, ph - s.h, 0, pw - s.w, 0.0f);
  const auto dh = ph / r;
  const auto dw = pw / r;
  Tensor out({s.n, dh, dw, s.c});
  const std::int64_t offset = (r - 1) / 2;
  const float inv_area = 1.0f / static_cast<float>(r * r);
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t i = 0; i < dh; ++i)
      for (std::int64_t j = 0; j < dw; ++j) {
        float* dst = out.pixel(n, i, j);
        switch (sampler) {
          case Sampler::kCenter: {
            const float* src = padded.pixel(n, i * r + offset, j * r + offset);
            std::copy(src, src + s.c, dst);
            break;
          }
          case Sampler::kAvg:
          case Sampler::kMax: {
            const bool is_max = sampler == Sampler::kMax;
            std::fill(dst, dst + s.c, is_max ? -std::numeric_limits<float>::infinity() : 0.0f);
            for (std::int64_t a = 0; a < r; ++a)
              for (std::int64_t b = 0; b < r; ++b) {
                const float* src = padded.pixel(n, i * r + a, j * r + b);
                for (std::int64_t c = 0; c < s.c; ++c) {
                  dst[c] = is_max ? std::max(dst[c], src[c]) : dst[c] + src[c];
                }
              }
            if (!is_max) {
              for (std::int64_t c = 0; c < s.c; ++c) dst[c] *= inv_area;
            }
            break;
          }
        }
      }
  return out;
}

Tensor delegate_attention(const Tensor& delegates, const nn::AttnParams& p) {
  const auto s = nhwc_of(delegates);
  const auto tokens = s.h * s.w;
  Tensor out(delegates.shape());
  for (std::int64_t n = 0; n < s.n; ++n) {
    Tensor seq({tokens, s.c});
    const float* src = delegates.raw() + n * tokens * s.c;
    std::copy(src, src + tokens * s.c, seq.raw());
    const Tensor mixed = nn::mhsa(seq, p);
    std::copy(mixed.raw(), mixed.raw() + tokens * s.c, out.raw() + n * tokens * s.c);
  }
  return out;
}

Tensor global_sparse_attn(const Tensor& x, const LglConfig& cfg, const nn::AttnParams& p) {
  return delegate_attention(sample_delegates(x, cfg.sample_rate, cfg.sampler), p);
}

Tensor kv_downsampled_attn(const Tensor& x, const LglConfig& cfg, const nn::AttnParams& p) {
  const auto s = nhwc_of(x);
  const Tensor delegates = sample_delegates(x, cfg.sample_rate, cfg.sampler);
  const auto ds = nhwc_of(delegates);
  const auto tq = s.h * s.w;
  const auto tk = ds.h * ds.w;
  Tensor out(x.shape());
  for (std::int64_t n = 0; n < s.n; ++n) {
    Tensor q({tq, s.c});
    Tensor kv({tk, s.c});
    std::copy(x.raw() + n * tq * s.c, x.raw() + (n + 1) * tq * s.c, q.raw());
    std::copy(delegates.raw() + n * tk * s.c, delegates.raw() + (n + 1) * tk * s.c, kv.raw());
    const Tensor mixed = nn::attention(q, kv, p);
    std::copy(mixed.raw(), mixed.raw() + tq * s.c, out.raw() + n * tq * s.c);
  }
  return out;
}

Tensor local_prop(const Tensor& delegates, const LglConfig& cfg, const LocalPropParams* p,
                  std::int64_t out_h, std::int64_t out_w) {
  const auto r = cfg.sample_rate;
  Tensor up;
  switch (cfg.propagation) {
    case Propagation::kTransposedConv:
      if (!p) throw MissingParameterError("local_prop.weight");
      up = nn::transposed_depthwise_conv2d(delegates, p->weight, p->bias, r);
      break;
    case Propagation::kBilinear:
      up = nn::bilinear_upsample(delegates, r);
      break;
    case Propagation::kNone:
      throw UnsupportedError("propagation 'none' has no local_prop step");
  }
  const auto s = nhwc_of(up);
  if (s.h != padded_extent(out_h, r) || s.w != padded_extent(out_w, r)) {
    throw InternalError("local_prop produced " + shape_to_string(up.shape()) +
                        ", cannot crop to " + std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  if (s.h == out_h && s.w == out_w) return up;
  return crop2d(up, 0, 0, out_h, out_w);
}

Tensor ffn(const Tensor& x, const FfnParams& p) {
  return nn::linear(nn::gelu(nn::linear(x, p.fc1)), p.fc2);
}

namespace {

template <typename GlobalMix>
Tensor run_block(const Tensor& x_in, const LglBlockParams& params, const LglConfig& cfg,
                 GlobalMix&& global_mix) {
  const auto s = nhwc_of(x_in);
  if (s.c != cfg.channels) {
    throw DimensionError("block expects " + std::to_string(cfg.channels) + " channels, got " +
                         shape_to_string(x_in.shape()));
  }
  Tensor x = x_in;
  if (cfg.has_local_branch()) {
    if (!params.local_agg || !params.norm1 || !params.norm2 || !params.ffn1) {
      throw MissingParameterError("local branch (norm1/local_agg/norm2/ffn1)");
    }
    if (cfg.dual_cpe) {
      if (!params.cpe1) throw MissingParameterError("cpe1");
      x = cpe(x, *params.cpe1);
    }
    x = add(local_agg(nn::layer_norm(x, *params.norm1), *params.local_agg), x);
    x = add(ffn(nn::layer_norm(x, *params.norm2), *params.ffn1), x);
  }
  x = cpe(x, params.cpe2);
  x = add(global_mix(nn::layer_norm(x, params.norm3)), x);
  return add(ffn(nn::layer_norm(x, params.norm4), params.ffn2), x);
}

}  // namespace

Tensor lgl_block(const Tensor& x_in, const LglBlockParams& params, const LglConfig& cfg) {
  cfg.validate();
  return run_block(x_in, params, cfg, [&](const Tensor& normed) {
    if (cfg.attn_mode == AttnMode::kKvDownsampled) {
      return kv_downsampled_attn(normed, cfg, params.attn);
    }
    const auto s = nhwc_of(normed);
    const LocalPropParams* lp = params.local_prop ? &*params.local_prop : nullptr;
    return local_prop(global_sparse_attn(normed, cfg, params.attn), cfg, lp, s.h, s.w);
  });
}

Tensor lgl_block_full_attention(const Tensor& x_in, const LglBlockParams& params,
                                const LglConfig& cfg) {
  cfg.validate();
  return run_block(x_in, params, cfg, [&](const Tensor& normed) {
    const Tensor mixed = delegate_attention(normed, params.attn);
    if (cfg.attn_mode == AttnMode::kKvDownsampled || cfg.sample_rate != 1) return mixed;
    // At r = 1 the propagation kernel is 1x1, applied as in the sparse path.
    const LocalPropParams* lp = params.local_prop ? &*params.local_prop : nullptr;
    const auto s = nhwc_of(normed);
    return local_prop(mixed, cfg, lp, s.h, s.w);
  });
}

}  // namespace edgevit::lgl
