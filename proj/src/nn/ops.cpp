#include "cxr/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cxr/error.hpp"

namespace cxr::nn {
namespace {

constexpr int kMr = 4;  // output channels per micro-tile
constexpr int kNr = 8;  // output pixels per micro-tile

// C[o][p] = sum_k A[o][k] * B[k][p] (+ bias[o]), with double accumulators.
// A is (M, K) row-major, B is (K, P) row-major, C has row stride P. The sum
// over k runs in index order for every (o, p) regardless of tiling.
void gemm_double_acc(const float* a, const float* b, const float* bias, float* c, int m, int k, int p) {
  thread_local std::vector<float> apack;
  thread_local std::vector<float> bpack;
  const int mblocks = (m + kMr - 1) / kMr;
  apack.assign(static_cast<std::size_t>(mblocks) * k * kMr, 0.0f);
  for (int o = 0; o < m; ++o) {
    float* dst = apack.data() + static_cast<std::size_t>(o / kMr) * k * kMr + o % kMr;
    const float* src = a + static_cast<std::size_t>(o) * k;
    for (int kk = 0; kk < k; ++kk) dst[static_cast<std::size_t>(kk) * kMr] = src[kk];
  }
  bpack.resize(static_cast<std::size_t>(k) * kNr);

  for (int p0 = 0; p0 < p; p0 += kNr) {
    const int pn = std::min(kNr, p - p0);
    for (int kk = 0; kk < k; ++kk) {
      const float* src = b + static_cast<std::size_t>(kk) * p + p0;
      float* dst = bpack.data() + static_cast<std::size_t>(kk) * kNr;
      for (int j = 0; j < kNr; ++j) dst[j] = j < pn ? src[j] : 0.0f;
    }
    for (int ob = 0; ob < mblocks; ++ob) {
      double acc[kMr][kNr] = {};
      const float* ap = apack.data() + static_cast<std::size_t>(ob) * k * kMr;
      const float* bp = bpack.data();
      for (int kk = 0; kk < k; ++kk) {
        const float* av = ap + static_cast<std::size_t>(kk) * kMr;
        const float* bv = bp + static_cast<std::size_t>(kk) * kNr;
        for (int i = 0; i < kMr; ++i) {
          const double ai = av[i];
          for (int j = 0; j < kNr; ++j) acc[i][j] += ai * static_cast<double>(bv[j]);
        }
      }
      const int mn = std::min(kMr, m - ob * kMr);
      for (int i = 0; i < mn; ++i) {
        const int o = ob * kMr + i;
        const double bo = bias != nullptr ? bias[o] : 0.0;
        float* out = c + static_cast<std::size_t>(o) * p + p0;
        for (int j = 0; j < pn; ++j) out[j] = static_cast<float>(acc[i][j] + bo);
      }
    }
  }
}

void im2col(const float* x, int channels, int h, int w, int kh, int kw, const Conv2dParams& prm, int oh, int ow,
            float* col) {
  const std::size_t pcount = static_cast<std::size_t>(oh) * ow;
  for (int ic = 0; ic < channels; ++ic) {
    const float* plane = x + static_cast<std::size_t>(ic) * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        float* row = col + (static_cast<std::size_t>(ic) * kh * kw + ky * kw + kx) * pcount;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * prm.stride - prm.padding + ky;
          float* dst = row + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * prm.stride - prm.padding + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

// One filter per channel (groups == in == out).
void depthwise(const float* x, int h, int w, const float* kernel, int kh, int kw, double bias, const Conv2dParams& prm,
               int oh, int ow, float* out) {
  thread_local std::vector<float> padded;
  const int ph = h + 2 * prm.padding;
  const int pw = w + 2 * prm.padding;
  padded.assign(static_cast<std::size_t>(ph) * pw, 0.0f);
  for (int y = 0; y < h; ++y) {
    std::copy(x + static_cast<std::size_t>(y) * w, x + static_cast<std::size_t>(y + 1) * w,
              padded.data() + static_cast<std::size_t>(y + prm.padding) * pw + prm.padding);
  }
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double acc = 0.0;
      const float* base = padded.data() + static_cast<std::size_t>(oy * prm.stride) * pw + ox * prm.stride;
      for (int ky = 0; ky < kh; ++ky) {
        const float* row = base + static_cast<std::size_t>(ky) * pw;
        const float* krow = kernel + ky * kw;
        for (int kx = 0; kx < kw; ++kx) acc += static_cast<double>(krow[kx]) * row[kx];
      }
      out[static_cast<std::size_t>(oy) * ow + ox] = static_cast<float>(acc + bias);
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

Tensor4 conv2d(const Tensor4& x, const ConvWeights& w, std::span<const float> bias, const Conv2dParams& p) {
  require(p.groups >= 1 && p.stride >= 1 && p.padding >= 0, "conv2d: invalid stride/padding/groups");
  require(w.out_channels >= 1 && w.in_per_group >= 1 && w.kernel_h >= 1 && w.kernel_w >= 1,
          "conv2d: invalid weight shape");
  require(x.c() == w.in_per_group * p.groups,
          "conv2d: input has " + std::to_string(x.c()) + " channels, weights expect " +
              std::to_string(w.in_per_group * p.groups));
  require(w.out_channels % p.groups == 0, "conv2d: out_channels not divisible by groups");
  require(w.values.size() ==
              static_cast<std::size_t>(w.out_channels) * w.in_per_group * w.kernel_h * w.kernel_w,
          "conv2d: weight value count mismatch");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(w.out_channels), "conv2d: bias length mismatch");
  const int span_h = x.h() + 2 * p.padding - w.kernel_h;
  const int span_w = x.w() + 2 * p.padding - w.kernel_w;
  require(span_h >= 0 && span_w >= 0, "conv2d: kernel larger than padded input");
  const int oh = span_h / p.stride + 1;
  const int ow = span_w / p.stride + 1;

  Tensor4 out({x.n(), w.out_channels, oh, ow});
  const int out_per_group = w.out_channels / p.groups;
  const int kdim = w.in_per_group * w.kernel_h * w.kernel_w;
  const std::size_t pcount = static_cast<std::size_t>(oh) * ow;
  const float* bias_ptr = bias.empty() ? nullptr : bias.data();
  const bool pointwise = w.kernel_h == 1 && w.kernel_w == 1 && p.stride == 1 && p.padding == 0;
  const bool is_depthwise = w.in_per_group == 1 && out_per_group == 1;

  thread_local std::vector<float> col;
  for (int n = 0; n < x.n(); ++n) {
    for (int g = 0; g < p.groups; ++g) {
      const float* xin = x.plane(n, g * w.in_per_group);
      const int o0 = g * out_per_group;
      if (is_depthwise) {
        depthwise(xin, x.h(), x.w(), w.values.data() + static_cast<std::size_t>(o0) * kdim, w.kernel_h, w.kernel_w,
                  bias_ptr ? bias_ptr[o0] : 0.0, p, oh, ow, out.plane(n, o0));
        continue;
      }
      const float* bmat = xin;
      if (!pointwise) {
        col.resize(static_cast<std::size_t>(kdim) * pcount);
        im2col(xin, w.in_per_group, x.h(), x.w(), w.kernel_h, w.kernel_w, p, oh, ow, col.data());
        bmat = col.data();
      }
      gemm_double_acc(w.values.data() + static_cast<std::size_t>(o0) * kdim, bmat, bias_ptr ? bias_ptr + o0 : nullptr,
                      out.plane(n, o0), out_per_group, kdim, static_cast<int>(pcount));
    }
  }
  return out;
}

Tensor4 batchnorm(const Tensor4& x, std::span<const float> gamma, std::span<const float> beta,
                  std::span<const float> running_mean, std::span<const float> running_var, double eps) {
  const auto c = static_cast<std::size_t>(x.c());
  require(gamma.size() == c && beta.size() == c && running_mean.size() == c && running_var.size() == c,
          "batchnorm: parameter length does not match " + std::to_string(c) + " channels");
  Tensor4 out(x.dims);
  for (int n = 0; n < x.n(); ++n) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const double scale = gamma[ch] / std::sqrt(static_cast<double>(running_var[ch]) + eps);
      const double mean = running_mean[ch];
      const double shift = beta[ch];
      const float* src = x.plane(n, ch);
      float* dst = out.plane(n, ch);
      for (std::size_t i = 0; i < x.plane_size(); ++i) dst[i] = static_cast<float>((src[i] - mean) * scale + shift);
    }
  }
  return out;
}

Tensor4 layernorm(const Tensor4& x, std::span<const float> gamma, std::span<const float> beta, double eps) {
  const auto c = static_cast<std::size_t>(x.c());
  require(gamma.size() == c && beta.size() == c,
          "layernorm: parameter length does not match " + std::to_string(c) + " channels");
  Tensor4 out(x.dims);
  const std::size_t hw = x.plane_size();
  std::vector<double> mean(hw);
  std::vector<double> var(hw);
  for (int n = 0; n < x.n(); ++n) {
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    for (int ch = 0; ch < x.c(); ++ch) {
      const float* src = x.plane(n, ch);
      for (std::size_t i = 0; i < hw; ++i) mean[i] += src[i];
    }
    for (auto& m : mean) m /= static_cast<double>(c);
    for (int ch = 0; ch < x.c(); ++ch) {
      const float* src = x.plane(n, ch);
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = src[i] - mean[i];
        var[i] += d * d;
      }
    }
    for (auto& v : var) v = 1.0 / std::sqrt(v / static_cast<double>(c) + eps);
    for (int ch = 0; ch < x.c(); ++ch) {
      const float* src = x.plane(n, ch);
      float* dst = out.plane(n, ch);
      const double g = gamma[ch];
      const double b = beta[ch];
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<float>((src[i] - mean[i]) * var[i] * g + b);
    }
  }
  return out;
}

Tensor4 relu(const Tensor4& x) {
  Tensor4 out = x;
  for (auto& v : out.data) v = std::max(v, 0.0f);
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Tensor4 gelu(const Tensor4& x) {
  Tensor4 out = x;
  for (auto& v : out.data) v = static_cast<float>(gelu(static_cast<double>(v)));
  return out;
}

Tensor4 maxpool(const Tensor4& x, int kernel, int stride, int padding) {
  require(kernel >= 1 && stride >= 1 && padding >= 0, "maxpool: invalid kernel/stride/padding");
  require(padding * 2 <= kernel, "maxpool: padding must be at most half the kernel");
  const int span_h = x.h() + 2 * padding - kernel;
  const int span_w = x.w() + 2 * padding - kernel;
  require(span_h >= 0 && span_w >= 0, "maxpool: kernel larger than padded input");
  const int oh = span_h / stride + 1;
  const int ow = span_w / stride + 1;
  Tensor4 out({x.n(), x.c(), oh, ow});
  for (int n = 0; n < x.n(); ++n) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const float* src = x.plane(n, ch);
      float* dst = out.plane(n, ch);
      for (int oy = 0; oy < oh; ++oy) {
        const int y0 = std::max(oy * stride - padding, 0);
        const int y1 = std::min(oy * stride - padding + kernel, x.h());
        for (int ox = 0; ox < ow; ++ox) {
          const int x0 = std::max(ox * stride - padding, 0);
          const int x1 = std::min(ox * stride - padding + kernel, x.w());
          float best = -std::numeric_limits<float>::infinity();
          for (int y = y0; y < y1; ++y) {
            for (int xx = x0; xx < x1; ++xx) best = std::max(best, src[static_cast<std::size_t>(y) * x.w() + xx]);
          }
          dst[static_cast<std::size_t>(oy) * ow + ox] = best;
        }
      }
    }
  }
  return out;
}

Tensor4 global_avg_pool(const Tensor4& x) {
  Tensor4 out({x.n(), x.c(), 1, 1});
  const std::size_t hw = x.plane_size();
  for (int n = 0; n < x.n(); ++n) {
    for (int ch = 0; ch < x.c(); ++ch) {
      const float* src = x.plane(n, ch);
      double sum = 0.0;
      for (std::size_t i = 0; i < hw; ++i) sum += src[i];
      out.at(n, ch, 0, 0) = static_cast<float>(sum / static_cast<double>(hw));
    }
  }
  return out;
}

Tensor4 linear(const Tensor4& x, std::span<const float> weight, int out_features, std::span<const float> bias) {
  const std::size_t in = x.sample_size();
  require(out_features >= 1, "linear: out_features must be positive");
  require(weight.size() == in * static_cast<std::size_t>(out_features),
          "linear: weight is not (" + std::to_string(out_features) + ", " + std::to_string(in) + ")");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(out_features), "linear: bias length mismatch");
  Tensor4 out({x.n(), out_features, 1, 1});
  for (int n = 0; n < x.n(); ++n) {
    const float* v = x.data.data() + n * in;
    for (int o = 0; o < out_features; ++o) {
      const float* row = weight.data() + static_cast<std::size_t>(o) * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += static_cast<double>(row[i]) * v[i];
      if (!bias.empty()) acc += bias[o];
      out.at(n, o, 0, 0) = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  require(a.dims == b.dims, "add: operand shapes differ " + to_string(a.dims) + " vs " + to_string(b.dims));
  Tensor4 out(a.dims);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax: empty input");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> wide(logits.begin(), logits.end());
  return softmax(std::span<const double>(wide));
}

}  // namespace cxr::nn
