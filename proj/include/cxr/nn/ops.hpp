#pragma once

#include <span>
#include <vector>

#include "cxr/nn/tensor.hpp"

namespace cxr::nn {

// Forward operators. Reductions accumulate in double and store float; every
// operator throws ShapeError on inconsistent operands.

struct ConvWeights {
  std::span<const float> values;  // (out_c, in_c / groups, kh, kw)
  int out_channels = 0;
  int in_per_group = 0;
  int kernel_h = 0;
  int kernel_w = 0;
};

struct Conv2dParams {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

/// Zero-padded cross-correlation. out = floor((in + 2p - k) / stride) + 1.
Tensor4 conv2d(const Tensor4& x, const ConvWeights& w, std::span<const float> bias, const Conv2dParams& p);

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kLayerNormEps = 1e-6;

/// Inference batch norm: gamma * (x - mean) / sqrt(var + eps) + beta.
Tensor4 batchnorm(const Tensor4& x, std::span<const float> gamma, std::span<const float> beta,
                  std::span<const float> running_mean, std::span<const float> running_var,
                  double eps = kBatchNormEps);

/// Normalises across channels at each (n, y, x) site, then per-channel affine.
Tensor4 layernorm(const Tensor4& x, std::span<const float> gamma, std::span<const float> beta,
                  double eps = kLayerNormEps);

Tensor4 relu(const Tensor4& x);
/// Exact GELU, x * Phi(x) with Phi via erf.
Tensor4 gelu(const Tensor4& x);
double gelu(double x);

/// Window max; padded positions never win.
Tensor4 maxpool(const Tensor4& x, int kernel, int stride, int padding);
/// Mean over each spatial plane -> (N, C, 1, 1).
Tensor4 global_avg_pool(const Tensor4& x);

/// y = W x + b over each sample flattened to C*H*W; W is (out, in) row-major.
/// Result is (N, out, 1, 1).
Tensor4 linear(const Tensor4& x, std::span<const float> weight, int out_features, std::span<const float> bias);

Tensor4 add(const Tensor4& a, const Tensor4& b);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const float> logits);
std::vector<double> softmax(std::span<const double> logits);

}  // namespace cxr::nn
