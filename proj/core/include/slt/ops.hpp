#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "slt/tensor.hpp"

// Differentiable tensor operations. All of them record a backward closure
// when grad mode is on and any input requires a gradient.
namespace slt::ops {

// Elementwise sum. `b` may also be a trailing suffix of `a`'s shape, in which
// case it is broadcast over the leading axes (bias vectors, constant tables).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// `s` is a one-element tensor (e.g. a learnable gate); gradient flows to both.
Tensor mul_scalar(const Tensor& a, const Tensor& s);
Tensor relu(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor bmm(const Tensor& a, const Tensor& b);     // [B,m,k] x [B,k,n]

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor transpose(const Tensor& a);  // rank-2 only
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);

// Numerically stable (max-subtracted) softmax along `axis`.
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

// Cross-correlation (no kernel flip). x: [N,Cin,H,W], kernel: [Cout,Cin,kh,kw],
// bias: [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);

enum class NormMode { kTrain, kEval };

// Running statistics owned by a batch-norm layer.
struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  std::size_t updates = 0;

  static BatchNormStats fresh(std::size_t channels);
};

// Per-channel normalization over (N,H,W). Training mode normalizes with the
// batch statistics (biased variance) and folds them into the running stats
// with the unbiased variance; eval mode uses the running stats.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                   NormMode mode, double momentum = 0.1, double eps = 1e-5);

// Rows of `table` [V,d] selected by `ids`; result [ids.size(), d].
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);

// Normalizes over the last axis, then applies gamma/beta of that width.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

}  // namespace slt::ops
