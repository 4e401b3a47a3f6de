#include "liteseg/nn.hpp"

#include <cmath>

namespace liteseg {

Conv2d Conv2d::create(int in_c, int out_c, int kernel, int stride, int padding, bool with_bias,
                      Rng& rng) {
    if (in_c < 1 || out_c < 1 || kernel < 1) throw ConfigError("conv dimensions must be positive");
    Conv2d layer;
    layer.stride = stride;
    layer.padding = padding;
    layer.weight = Tensor::zeros({out_c, in_c, kernel, kernel}, /*requires_grad=*/true);
    const float stddev =
        std::sqrt(2.0f / (static_cast<float>(out_c) * static_cast<float>(kernel) * kernel));
    std::normal_distribution<float> dist(0.0f, stddev);
    for (float& v : layer.weight.vec()) v = dist(rng);
    if (with_bias) layer.bias = Tensor::zeros({out_c}, /*requires_grad=*/true);
    return layer;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    out.push_back({prefix + ".weight", weight, true, false});
    if (bias.defined()) out.push_back({prefix + ".bias", bias, true, true});
}

BatchNorm2d BatchNorm2d::create(int channels) {
    BatchNorm2d bn;
    bn.gamma = Tensor::full({channels}, 1.0f, /*requires_grad=*/true);
    bn.beta = Tensor::zeros({channels}, /*requires_grad=*/true);
    bn.running_mean = Tensor::zeros({channels});
    bn.running_var = Tensor::full({channels}, 1.0f);
    return bn;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    out.push_back({prefix + ".gamma", gamma, true, true});
    out.push_back({prefix + ".beta", beta, true, true});
    out.push_back({prefix + ".running_mean", running_mean, false, false});
    out.push_back({prefix + ".running_var", running_var, false, false});
}

ConvBNReLU ConvBNReLU::create(int in_c, int out_c, int kernel, int stride, int padding,
                              bool with_relu, Rng& rng) {
    ConvBNReLU block;
    block.conv = Conv2d::create(in_c, out_c, kernel, stride, padding, /*with_bias=*/false, rng);
    block.bn = BatchNorm2d::create(out_c);
    block.with_relu = with_relu;
    return block;
}

void ConvBNReLU::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    conv.collect(prefix + ".conv", out);
    bn.collect(prefix + ".bn", out);
}

std::int64_t count_parameters(const std::vector<ParamRef>& params, bool trainable_only) {
    std::int64_t total = 0;
    for (const ParamRef& p : params) {
        if (trainable_only && !p.trainable) continue;
        total += p.tensor.numel();
    }
    return total;
}

}  // namespace liteseg
