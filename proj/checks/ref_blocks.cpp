#include "ref_blocks.hpp"

#include <algorithm>

namespace liteseg::ref {

RefConv make_ref(const Conv2d& layer) {
    RefConv c;
    c.weight = from_tensor(layer.weight);
    if (layer.bias.defined()) c.bias = from_tensor(layer.bias);
    c.stride = layer.stride;
    c.padding = layer.padding;
    return c;
}

RefBN make_ref(const BatchNorm2d& layer, bool training) {
    RefBN bn;
    bn.gamma = from_tensor(layer.gamma);
    bn.beta = from_tensor(layer.beta);
    bn.running_mean = from_tensor(layer.running_mean);
    bn.running_var = from_tensor(layer.running_var);
    bn.eps = static_cast<double>(layer.eps);
    bn.training = training;
    return bn;
}

RefCBR make_ref(const ConvBNReLU& layer, bool training) {
    RefCBR block;
    block.conv = make_ref(layer.conv);
    block.bn = make_ref(layer.bn, training);
    block.with_relu = layer.with_relu;
    return block;
}

RefTensor spatial_attention(const RefTensor& f_up, const RefTensor& f_low, const RefConv& conv,
                            bool include_max) {
    auto [up_mean, up_max] = channel_mean_max(f_up);
    auto [low_mean, low_max] = channel_mean_max(f_low);
    RefTensor cat = include_max ? concat({up_mean, up_max, low_mean, low_max}, 1)
                                : concat({up_mean, low_mean}, 1);
    return sigmoid(conv.forward(cat));
}

RefTensor channel_attention(const RefTensor& f_up, const RefTensor& f_low, const RefConv& conv) {
    auto [up_avg, up_max] = spatial_avg_max_pool(f_up);
    auto [low_avg, low_max] = spatial_avg_max_pool(f_low);
    return sigmoid(conv.forward(concat({up_avg, up_max, low_avg, low_max}, 1)));
}

RefTensor uafm_blend(const RefTensor& f_up, const RefTensor& f_low, const RefTensor& alpha) {
    return add(mul(f_up, alpha), mul(f_low, affine(alpha, -1.0, 1.0)));
}

RefTensor RefUafm::forward(const RefTensor& f_high, const RefTensor& f_low) const {
    RefTensor high = high_proj ? high_proj->forward(f_high) : f_high;
    RefTensor low = low_proj ? low_proj->forward(f_low) : f_low;
    RefTensor f_up = bilinear_upsample(high, low.dim(2), low.dim(3));
    if (sum_fusion) return add(f_up, low);
    RefTensor alpha;
    switch (attention) {
        case AttentionKind::Spatial:
            alpha = spatial_attention(f_up, low, *attention_conv, true);
            break;
        case AttentionKind::SpatialNoMax:
            alpha = spatial_attention(f_up, low, *attention_conv, false);
            break;
        case AttentionKind::Channel:
            alpha = channel_attention(f_up, low, *attention_conv);
            break;
        case AttentionKind::None:
            alpha = RefTensor({f_up.dim(0), 1, f_up.dim(2), f_up.dim(3)}, 0.5);
            break;
    }
    return uafm_blend(f_up, low, alpha);
}

RefUafm make_ref(const UafmBlock& block, bool training) {
    RefUafm r;
    r.channels = block.channels;
    r.attention = block.attention;
    r.sum_fusion = block.sum_fusion;
    if (block.high_proj) r.high_proj = make_ref(*block.high_proj, training);
    if (block.low_proj) r.low_proj = make_ref(*block.low_proj, training);
    if (block.attention_conv) r.attention_conv = make_ref(*block.attention_conv);
    return r;
}

RefTensor RefSppm::forward(const RefTensor& x) const {
    const int h = x.dim(2), w = x.dim(3);
    RefTensor acc;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        int bh = std::min(bins[i], h);
        int bw = std::min(bins[i], w);
        RefTensor up = bilinear_upsample(branches[i].forward(adaptive_avg_pool(x, bh, bw)), h, w);
        acc = acc.data.empty() ? up : add(acc, up);
    }
    return fuse.forward(acc);
}

RefSppm make_ref(const SppmBlock& block, bool training) {
    RefSppm r;
    r.bins = block.bins;
    for (std::size_t i = 0; i < r.branches.size(); ++i) {
        r.branches[i] = make_ref(block.branch_convs[i], training);
    }
    r.fuse = make_ref(block.fuse_conv, training);
    return r;
}

RefTensor RefSegHead::forward(const RefTensor& x, int out_h, int out_w) const {
    return bilinear_upsample(classifier.forward(mid.forward(x)), out_h, out_w);
}

RefSegHead make_ref(const SegHead& head, bool training) {
    RefSegHead r;
    r.mid = make_ref(head.mid_conv, training);
    r.classifier = make_ref(head.classifier);
    return r;
}

}  // namespace liteseg::ref
