#pragma once

#include <random>
#include <string>
#include <vector>

#include "liteseg/ops.hpp"

namespace liteseg {

using Rng = std::mt19937_64;

// Named handle to a parameter or buffer; copies share storage with the owning
// layer. Buffers (running statistics) are serialized but not optimized.
struct ParamRef {
    std::string name;
    Tensor tensor;
    bool trainable = true;
    bool no_decay = false;  // BN affine terms and biases skip weight decay
};

struct Conv2d {
    Tensor weight;  // [outC, inC, kH, kW]
    Tensor bias;    // optional [outC]
    int stride = 1;
    int padding = 0;

    // Kaiming fan-out normal init; bias (when present) starts at zero.
    static Conv2d create(int in_c, int out_c, int kernel, int stride, int padding, bool with_bias,
                         Rng& rng);

    Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
    int in_channels() const { return weight.dim(1); }
    int out_channels() const { return weight.dim(0); }
};

struct BatchNorm2d {
    Tensor gamma, beta;               // trainable [C]
    Tensor running_mean, running_var; // buffers [C]
    float eps = 1e-5f;
    float momentum = 0.9f;

    static BatchNorm2d create(int channels);

    Tensor forward(const Tensor& x, bool training) {
        return batch_norm(x, gamma, beta, running_mean, running_var, eps, momentum, training);
    }
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
};

// Conv (no bias) + BN, with optional trailing ReLU.
struct ConvBNReLU {
    Conv2d conv;
    BatchNorm2d bn;
    bool with_relu = true;

    static ConvBNReLU create(int in_c, int out_c, int kernel, int stride, int padding,
                             bool with_relu, Rng& rng);

    Tensor forward(const Tensor& x, bool training) {
        Tensor y = bn.forward(conv.forward(x), training);
        return with_relu ? relu(y) : y;
    }
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
};

std::int64_t count_parameters(const std::vector<ParamRef>& params, bool trainable_only = true);

}  // namespace liteseg
