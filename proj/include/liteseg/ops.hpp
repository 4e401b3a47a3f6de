#pragma once

#include <utility>
#include <vector>

#include "liteseg/tensor.hpp"

namespace liteseg {

// Differentiable kernels. All 4-D tensors are [N, C, H, W]. Every kernel is
// deterministic: identical inputs give bit-identical outputs for any worker
// count (work units are fixed and reductions run in a fixed order).

// Cross-correlation with zero padding.
// x [N,C,H,W] * weight [outC,C,kH,kW] -> [N,outC,outH,outW],
// outH = (H + 2*padding - kH) / stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding);
Tensor conv2d(const Tensor& x, const Tensor& weight, int stride, int padding);

// Batch normalization over the channel axis. Training mode normalizes with
// batch statistics and updates running_mean/running_var in place with
// new = momentum * old + (1 - momentum) * batch; eval mode uses the running
// statistics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, float eps, float momentum, bool training);

Tensor relu(const Tensor& x);
// Output is clamped to the open interval (0, 1).
Tensor sigmoid(const Tensor& x);

// Align-corners-false bilinear interpolation; upscale only (out >= in).
Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w);

// Mean over floor/ceil partitioned regions: region i spans
// [floor(i*H/bins), ceil((i+1)*H/bins)). Requires bin <= input extent.
Tensor adaptive_avg_pool(const Tensor& x, int bin_h, int bin_w);

// Per-pixel mean and max over the channel axis -> two [N,1,H,W] tensors.
std::pair<Tensor, Tensor> channel_mean_max(const Tensor& x);

// Per-channel global average and max -> two [N,C,1,1] tensors.
std::pair<Tensor, Tensor> spatial_avg_max_pool(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, int axis);

// Elementwise add/mul. Shapes must match, or one operand may be a scalar
// (numel 1), a spatial weight [N,1,H,W], or a channel weight [N,C,1,1]
// broadcast against [N,C,H,W].
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// k * x + c, elementwise.
Tensor affine(const Tensor& x, float k, float c);

// Sum of all elements -> scalar tensor [1].
Tensor sum(const Tensor& x);

}  // namespace liteseg
