#include "edgevit/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "edgevit/errors.hpp"
#include "edgevit/op_counter.hpp"
#include "edgevit/parallel.hpp"

namespace edgevit::nn {

float AttnParams::scale() const {
  return 1.0f / std::sqrt(static_cast<float>(channels() / heads));
}

namespace {

struct ConvGeometry {
  Nhwc in;
  std::int64_t kh, kw, cin_pg, cout, cout_pg, oh, ow;
};

ConvGeometry check_conv(const Tensor& x, const Conv2dParams& p) {
  const auto in = nhwc_of(x);
  if (p.weight.rank() != 4) {
    throw DimensionError("conv weight must be [kh,kw,Cin/groups,Cout], got " +
                         shape_to_string(p.weight.shape()));
  }
  if (p.groups < 1 || p.stride_h < 1 || p.stride_w < 1 || p.pad_h < 0 || p.pad_w < 0) {
    throw ConfigError("conv requires groups >= 1, stride >= 1 and padding >= 0");
  }
  ConvGeometry g{in, p.kernel_h(), p.kernel_w(), p.in_per_group(), p.out_channels(), 0, 0, 0};
  if (in.c != p.groups * g.cin_pg) {
    throw DimensionError("conv input has " + std::to_string(in.c) + " channels, weight " +
                         shape_to_string(p.weight.shape()) + " with groups=" +
                         std::to_string(p.groups) + " expects " +
                         std::to_string(p.groups * g.cin_pg));
  }
  if (g.cout % p.groups != 0) {
    throw DimensionError("conv output channels " + std::to_string(g.cout) +
                         " not divisible by groups " + std::to_string(p.groups));
  }
  if (p.bias && (p.bias->rank() != 1 || p.bias->dim(0) != g.cout)) {
    throw DimensionError("conv bias shape " + shape_to_string(p.bias->shape()) +
                         " does not match Cout=" + std::to_string(g.cout));
  }
  const auto ph = in.h + 2 * p.pad_h;
  const auto pw = in.w + 2 * p.pad_w;
  if (g.kh > ph || g.kw > pw) {
    throw DimensionError("conv kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                         " larger than padded input " + std::to_string(ph) + "x" +
                         std::to_string(pw));
  }
  g.cout_pg = g.cout / p.groups;
  g.oh = (ph - g.kh) / p.stride_h + 1;
  g.ow = (pw - g.kw) / p.stride_w + 1;
  return g;
}

Tensor conv2d_direct(const Tensor& x, const Conv2dParams& p, const ConvGeometry& g) {
  Tensor out({g.in.n, g.oh, g.ow, g.cout});
  const float* px = x.raw();
  const float* pw = p.weight.raw();
  float* po = out.raw();
  const std::int64_t groups = p.groups;
  parallel_for(0, g.in.n * g.oh, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t row = r0; row < r1; ++row) {
      const auto n = row / g.oh;
      const auto oi = row % g.oh;
      for (std::int64_t oj = 0; oj < g.ow; ++oj) {
        float* acc = po + ((n * g.oh + oi) * g.ow + oj) * g.cout;
        if (p.bias) {
          std::copy(p.bias->raw(), p.bias->raw() + g.cout, acc);
        }
        for (std::int64_t ki = 0; ki < g.kh; ++ki) {
          const auto ii = oi * p.stride_h - p.pad_h + ki;
          if (ii < 0 || ii >= g.in.h) continue;
          for (std::int64_t kj = 0; kj < g.kw; ++kj) {
            const auto jj = oj * p.stride_w - p.pad_w + kj;
            if (jj < 0 || jj >= g.in.w) continue;
            const float* xpix = px + ((n * g.in.h + ii) * g.in.w + jj) * g.in.c;
            const float* wtap = pw + (ki * g.kw + kj) * g.cin_pg * g.cout;
            if (g.cin_pg == 1 && g.cout_pg == 1) {
              // depthwise: channel c reads only input channel c
              for (std::int64_t c = 0; c < g.cout; ++c) acc[c] += xpix[c] * wtap[c];
              continue;
            }
            for (std::int64_t grp = 0; grp < groups; ++grp) {
              for (std::int64_t ci = 0; ci < g.cin_pg; ++ci) {
                const float xv = xpix[grp * g.cin_pg + ci];
                const float* wrow = wtap + ci * g.cout + grp * g.cout_pg;
                float* arow = acc + grp * g.cout_pg;
                for (std::int64_t o = 0; o < g.cout_pg; ++o) arow[o] += xv * wrow[o];
              }
            }
          }
        }
      }
    }
  });
  return out;
}

Tensor conv2d_im2col(const Tensor& x, const Conv2dParams& p, const ConvGeometry& g) {
  if (p.groups != 1) throw UnsupportedError("im2col convolution supports groups == 1 only");
  const auto rows = g.in.n * g.oh * g.ow;
  const auto cols = g.kh * g.kw * g.in.c;
  Tensor patches;
  const bool is_identity_patch = g.kh == 1 && g.kw == 1 && p.stride_h == 1 && p.stride_w == 1 &&
                                 p.pad_h == 0 && p.pad_w == 0;
  if (is_identity_patch) {
    patches = x.reshape({rows, cols});
  } else {
    patches = Tensor({rows, cols});
    float* dst = patches.raw();
    for (std::int64_t n = 0; n < g.in.n; ++n)
      for (std::int64_t oi = 0; oi < g.oh; ++oi)
        for (std::int64_t oj = 0; oj < g.ow; ++oj) {
          for (std::int64_t ki = 0; ki < g.kh; ++ki) {
            const auto ii = oi * p.stride_h - p.pad_h + ki;
            for (std::int64_t kj = 0; kj < g.kw; ++kj) {
              const auto jj = oj * p.stride_w - p.pad_w + kj;
              if (ii >= 0 && ii < g.in.h && jj >= 0 && jj < g.in.w) {
                const float* src = x.raw() + ((n * g.in.h + ii) * g.in.w + jj) * g.in.c;
                std::copy(src, src + g.in.c, dst);
              }
              dst += g.in.c;
            }
          }
        }
  }
  Tensor out = matmul(patches, p.weight.reshape({cols, g.cout}));
  if (p.bias) {
    const float* b = p.bias->raw();
    for (std::int64_t r = 0; r < rows; ++r) {
      float* orow = out.raw() + r * g.cout;
      for (std::int64_t c = 0; c < g.cout; ++c) orow[c] += b[c];
    }
  }
  return out.reshape({g.in.n, g.oh, g.ow, g.cout});
}

}  // namespace

Tensor conv2d(const Tensor& x, const Conv2dParams& p, ConvAlgo algo) {
  const auto g = check_conv(x, p);
  record_macs(MacKind::kConv, static_cast<std::uint64_t>(g.kh * g.kw * g.cin_pg * g.cout *
                                                         g.oh * g.ow * g.in.n));
  if (algo == ConvAlgo::kAuto) algo = p.groups == 1 ? ConvAlgo::kIm2col : ConvAlgo::kDirect;
  return algo == ConvAlgo::kDirect ? conv2d_direct(x, p, g) : conv2d_im2col(x, p, g);
}

Tensor transposed_depthwise_conv2d(const Tensor& x, const Tensor& weight,
                                   const std::optional<Tensor>& bias, std::int64_t stride) {
  const auto s = nhwc_of(x);
  if (weight.rank() != 3) {
    throw DimensionError("transposed depthwise weight must be [r,r,C], got " +
                         shape_to_string(weight.shape()));
  }
  if (weight.dim(0) != stride || weight.dim(1) != stride) {
    throw UnsupportedError("transposed depthwise convolution requires kernel == stride, got kernel " +
                           std::to_string(weight.dim(0)) + "x" + std::to_string(weight.dim(1)) +
                           " stride " + std::to_string(stride));
  }
  if (weight.dim(2) != s.c) {
    throw DimensionError("transposed depthwise weight channels " + std::to_string(weight.dim(2)) +
                         " vs input " + std::to_string(s.c));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != s.c)) {
    throw DimensionError("transposed depthwise bias shape " + shape_to_string(bias->shape()));
  }
  const auto r = stride;
  record_macs(MacKind::kTransposedConv, static_cast<std::uint64_t>(r * r * s.c * s.h * s.w * s.n));
  Tensor out({s.n, s.h * r, s.w * r, s.c});
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t i = 0; i < s.h * r; ++i)
      for (std::int64_t j = 0; j < s.w * r; ++j) {
        const float* src = x.raw() + ((n * s.h + i / r) * s.w + j / r) * s.c;
        const float* w = weight.raw() + ((i % r) * r + (j % r)) * s.c;
        float* dst = out.pixel(n, i, j);
        for (std::int64_t c = 0; c < s.c; ++c) {
          dst[c] = src[c] * w[c] + (bias ? (*bias)[c] : 0.0f);
        }
      }
  return out;
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
  const auto c = x.dim(-1);
  if (p.gamma.numel() != c || p.beta.numel() != c) {
    throw DimensionError("layer_norm params size " + std::to_string(p.gamma.numel()) +
                         " vs channels " + std::to_string(c));
  }
  if (!(p.epsilon > 0.0f)) throw ConfigError("layer_norm epsilon must be positive");
  Tensor out(x.shape());
  const auto tokens = x.numel() / c;
  const float* g = p.gamma.raw();
  const float* b = p.beta.raw();
  for (std::int64_t t = 0; t < tokens; ++t) {
    const float* src = x.raw() + t * c;
    float* dst = out.raw() + t * c;
    double mean = 0.0;
    for (std::int64_t i = 0; i < c; ++i) mean += src[i];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::int64_t i = 0; i < c; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(p.epsilon));
    for (std::int64_t i = 0; i < c; ++i) {
      dst[i] = static_cast<float>((src[i] - mean) * inv) * g[i] + b[i];
    }
  }
  return out;
}

float gelu(float x) {
  return static_cast<float>(0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))));
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) out[i] = gelu(x[i]);
  return out;
}

Tensor softmax(const Tensor& x) {
  const auto n = x.dim(-1);
  Tensor out(x.shape());
  const auto rows = x.numel() / n;
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* src = x.raw() + r * n;
    float* dst = out.raw() + r * n;
    const float m = *std::max_element(src, src + n);
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      dst[i] = std::exp(src[i] - m);
      sum += dst[i];
    }
    const auto inv = static_cast<float>(1.0 / sum);
    for (std::int64_t i = 0; i < n; ++i) dst[i] *= inv;
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias) {
  if (weight.rank() != 2) {
    throw DimensionError("linear weight must be [Cin,Cout], got " + shape_to_string(weight.shape()));
  }
  const auto cin = weight.dim(0);
  const auto cout = weight.dim(1);
  if (x.dim(-1) != cin) {
    throw DimensionError("linear input " + shape_to_string(x.shape()) + " vs weight " +
                         shape_to_string(weight.shape()));
  }
  if (bias && bias->numel() != cout) {
    throw DimensionError("linear bias shape " + shape_to_string(bias->shape()) +
                         " vs Cout=" + std::to_string(cout));
  }
  const auto rows = x.numel() / cin;
  record_macs(MacKind::kLinear, static_cast<std::uint64_t>(rows * cin * cout));
  Tensor y = matmul(x.reshape({rows, cin}), weight);
  if (bias) {
    const float* b = bias->raw();
    for (std::int64_t r = 0; r < rows; ++r) {
      float* yr = y.raw() + r * cout;
      for (std::int64_t c = 0; c < cout; ++c) yr[c] += b[c];
    }
  }
  Shape out_shape = x.shape();
  out_shape.back() = cout;
  return y.reshape(std::move(out_shape));
}

Tensor linear(const Tensor& x, const LinearParams& p) { return linear(x, p.weight, p.bias); }

Tensor attention(const Tensor& queries, const Tensor& keys_values, const AttnParams& p) {
  if (queries.rank() != 2 || keys_values.rank() != 2) {
    throw DimensionError("attention expects [T,C] token matrices, got " +
                         shape_to_string(queries.shape()) + " and " +
                         shape_to_string(keys_values.shape()));
  }
  const auto c = queries.dim(1);
  if (keys_values.dim(1) != c) {
    throw DimensionError("attention query/key channel mismatch: " + std::to_string(c) + " vs " +
                         std::to_string(keys_values.dim(1)));
  }
  if (p.heads < 1 || c % p.heads != 0) {
    throw DimensionError("attention channels " + std::to_string(c) + " not divisible by heads " +
                         std::to_string(p.heads));
  }
  for (const Tensor* w : {&p.wq, &p.wk, &p.wv, &p.wo}) {
    if (w->shape() != Shape{c, c}) {
      throw DimensionError("attention projection must be [C,C] with C=" + std::to_string(c) +
                           ", got " + shape_to_string(w->shape()));
    }
  }
  const Tensor q = linear(queries, p.wq, p.bq);
  const Tensor k = linear(keys_values, p.wk, p.bk);
  const Tensor v = linear(keys_values, p.wv, p.bv);
  const auto tq = queries.dim(0);
  const auto tk = keys_values.dim(0);
  const auto d = c / p.heads;
  const float scale = p.scale();
  record_macs(MacKind::kAttnScores, static_cast<std::uint64_t>(tq * tk * c));
  record_macs(MacKind::kAttnValues, static_cast<std::uint64_t>(tq * tk * c));

  Tensor mixed({tq, c});
  parallel_for(0, tq, [&](std::int64_t i0, std::int64_t i1) {
    std::vector<float> row(static_cast<std::size_t>(tk));
    for (std::int64_t i = i0; i < i1; ++i) {
      for (std::int64_t h = 0; h < p.heads; ++h) {
        const float* qi = q.raw() + i * c + h * d;
        for (std::int64_t j = 0; j < tk; ++j) {
          const float* kj = k.raw() + j * c + h * d;
          float s = 0.0f;
          for (std::int64_t e = 0; e < d; ++e) s += qi[e] * kj[e];
          row[static_cast<std::size_t>(j)] = s * scale;
        }
        const float m = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (auto& s : row) {
          s = std::exp(s - m);
          sum += s;
        }
        const auto inv = static_cast<float>(1.0 / sum);
        float* out = mixed.raw() + i * c + h * d;
        for (std::int64_t j = 0; j < tk; ++j) {
          const float a = row[static_cast<std::size_t>(j)] * inv;
          const float* vj = v.raw() + j * c + h * d;
          for (std::int64_t e = 0; e < d; ++e) out[e] += a * vj[e];
        }
      }
    }
  });
  return linear(mixed, p.wo, p.bo);
}

Tensor mhsa(const Tensor& tokens, const AttnParams& p) { return attention(tokens, tokens, p); }

Tensor bilinear_upsample(const Tensor& x, std::int64_t factor) {
  if (factor < 1) throw ConfigError("bilinear upsample factor must be >= 1");
  const auto s = nhwc_of(x);
  const auto oh = s.h * factor;
  const auto ow = s.w * factor;
  Tensor out({s.n, oh, ow, s.c});
  const double inv = 1.0 / static_cast<double>(factor);
  auto source = [inv](std::int64_t dst, std::int64_t extent, std::int64_t& i0, std::int64_t& i1,
                      float& frac) {
    double src = (static_cast<double>(dst) + 0.5) * inv - 0.5;
    if (src < 0.0) src = 0.0;
    i0 = std::min(static_cast<std::int64_t>(src), extent - 1);
    i1 = std::min(i0 + 1, extent - 1);
    frac = static_cast<float>(src - static_cast<double>(i0));
  };
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t i = 0; i < oh; ++i) {
      std::int64_t h0, h1;
      float fh;
      source(i, s.h, h0, h1, fh);
      for (std::int64_t j = 0; j < ow; ++j) {
        std::int64_t w0, w1;
        float fw;
        source(j, s.w, w0, w1, fw);
        const float* a = x.pixel(n, h0, w0);
        const float* b = x.pixel(n, h0, w1);
        const float* cc = x.pixel(n, h1, w0);
        const float* dd = x.pixel(n, h1, w1);
        float* dst = out.pixel(n, i, j);
        for (std::int64_t ch = 0; ch < s.c; ++ch) {
          const float top = a[ch] + (b[ch] - a[ch]) * fw;
          const float bot = cc[ch] + (dd[ch] - cc[ch]) * fw;
          dst[ch] = top + (bot - top) * fh;
        }
      }
    }
  return out;
}

}  // namespace edgevit::nn
