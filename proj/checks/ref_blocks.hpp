#pragma once

#include <array>
#include <optional>

#include "liteseg/seg_modules.hpp"
#include "ref_ops.hpp"

namespace liteseg::ref {

// Double-precision mirrors of the composite blocks, assembled from explicit
// weight tensors so finite differences can perturb any of them.

struct RefConv {
    RefTensor weight;
    RefTensor bias;  // may be empty
    int stride = 1;
    int padding = 0;

    RefTensor forward(const RefTensor& x) const {
        return conv2d(x, weight, bias, stride, padding);
    }
};

struct RefBN {
    RefTensor gamma, beta;
    RefTensor running_mean, running_var;
    double eps = 1e-5;
    bool training = false;

    RefTensor forward(const RefTensor& x) const {
        return training ? batch_norm_train(x, gamma, beta, eps)
                        : batch_norm_eval(x, gamma, beta, running_mean, running_var, eps);
    }
};

struct RefCBR {
    RefConv conv;
    RefBN bn;
    bool with_relu = true;

    RefTensor forward(const RefTensor& x) const {
        RefTensor y = bn.forward(conv.forward(x));
        return with_relu ? relu(y) : y;
    }
};

RefConv make_ref(const Conv2d& layer);
RefBN make_ref(const BatchNorm2d& layer, bool training);
RefCBR make_ref(const ConvBNReLU& layer, bool training);

RefTensor spatial_attention(const RefTensor& f_up, const RefTensor& f_low, const RefConv& conv,
                            bool include_max);
RefTensor channel_attention(const RefTensor& f_up, const RefTensor& f_low, const RefConv& conv);
RefTensor uafm_blend(const RefTensor& f_up, const RefTensor& f_low, const RefTensor& alpha);

struct RefUafm {
    int channels = 0;
    AttentionKind attention = AttentionKind::Spatial;
    bool sum_fusion = false;
    std::optional<RefCBR> high_proj;
    std::optional<RefCBR> low_proj;
    std::optional<RefConv> attention_conv;

    RefTensor forward(const RefTensor& f_high, const RefTensor& f_low) const;
};
RefUafm make_ref(const UafmBlock& block, bool training);

struct RefSppm {
    std::array<int, 3> bins{1, 2, 4};
    std::array<RefCBR, 3> branches;
    RefCBR fuse;

    RefTensor forward(const RefTensor& x) const;
};
RefSppm make_ref(const SppmBlock& block, bool training);

struct RefSegHead {
    RefCBR mid;
    RefConv classifier;

    RefTensor forward(const RefTensor& x, int out_h, int out_w) const;
};
RefSegHead make_ref(const SegHead& head, bool training);

}  // namespace liteseg::ref
