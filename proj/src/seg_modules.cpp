#include "liteseg/seg_modules.hpp"

#include <algorithm>

namespace liteseg {

std::string attention_kind_name(AttentionKind kind) {
    switch (kind) {
        case AttentionKind::Spatial: return "spatial";
        case AttentionKind::SpatialNoMax: return "spatial_nomax";
        case AttentionKind::Channel: return "channel";
        case AttentionKind::None: return "none";
    }
    throw ConfigError("unknown attention kind");
}

AttentionKind attention_kind_from_name(const std::string& name) {
    if (name == "spatial") return AttentionKind::Spatial;
    if (name == "spatial_nomax") return AttentionKind::SpatialNoMax;
    if (name == "channel") return AttentionKind::Channel;
    if (name == "none") return AttentionKind::None;
    throw ConfigError("unknown attention kind '" + name + "'");
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!shape_eq(a.shape(), b.shape())) {
        throw ShapeError(std::string(what) + " expects equal shapes, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
}

}  // namespace

Tensor spatial_attention(const Tensor& f_up, const Tensor& f_low, const Conv2d& conv,
                         bool include_max) {
    check_same_shape(f_up, f_low, "spatial_attention");
    auto [up_mean, up_max] = channel_mean_max(f_up);
    auto [low_mean, low_max] = channel_mean_max(f_low);
    Tensor cat = include_max ? concat({up_mean, up_max, low_mean, low_max}, 1)
                             : concat({up_mean, low_mean}, 1);
    if (conv.in_channels() != cat.dim(1)) {
        throw ShapeError("spatial_attention conv expects " + std::to_string(conv.in_channels()) +
                         " channels, feature has " + std::to_string(cat.dim(1)));
    }
    return sigmoid(conv.forward(cat));
}

Tensor channel_attention(const Tensor& f_up, const Tensor& f_low, const Conv2d& conv) {
    check_same_shape(f_up, f_low, "channel_attention");
    auto [up_avg, up_max] = spatial_avg_max_pool(f_up);
    auto [low_avg, low_max] = spatial_avg_max_pool(f_low);
    Tensor cat = concat({up_avg, up_max, low_avg, low_max}, 1);  // [N,4C,1,1]
    if (conv.in_channels() != cat.dim(1)) {
        throw ShapeError("channel_attention conv expects " + std::to_string(conv.in_channels()) +
                         " channels, feature has " + std::to_string(cat.dim(1)));
    }
    return sigmoid(conv.forward(cat));
}

Tensor uafm_blend(const Tensor& f_up, const Tensor& f_low, const Tensor& alpha) {
    check_same_shape(f_up, f_low, "uafm_blend");
    return add(mul(f_up, alpha), mul(f_low, affine(alpha, -1.0f, 1.0f)));
}

UafmBlock UafmBlock::create(int high_channels, int low_channels, int channels,
                            AttentionKind attention, bool sum_fusion, Rng& rng) {
    UafmBlock block;
    block.channels = channels;
    block.attention = attention;
    block.sum_fusion = sum_fusion;
    if (high_channels != channels) {
        block.high_proj = ConvBNReLU::create(high_channels, channels, 1, 1, 0, true, rng);
    }
    if (low_channels != channels) {
        block.low_proj = ConvBNReLU::create(low_channels, channels, 1, 1, 0, /*with_relu=*/false, rng);
    }
    switch (attention) {
        case AttentionKind::Spatial:
            block.attention_conv = Conv2d::create(4, 1, 3, 1, 1, /*with_bias=*/true, rng);
            break;
        case AttentionKind::SpatialNoMax:
            block.attention_conv = Conv2d::create(2, 1, 3, 1, 1, /*with_bias=*/true, rng);
            break;
        case AttentionKind::Channel:
            block.attention_conv =
                Conv2d::create(4 * channels, channels, 1, 1, 0, /*with_bias=*/true, rng);
            break;
        case AttentionKind::None:
            break;
    }
    return block;
}

Tensor UafmBlock::forward(const Tensor& f_high, const Tensor& f_low, bool training) {
    Tensor high = high_proj ? high_proj->forward(f_high, training) : f_high;
    Tensor low = low_proj ? low_proj->forward(f_low, training) : f_low;
    if (high.dim(1) != channels || low.dim(1) != channels) {
        throw ShapeError("uafm channel mismatch after projection: high " +
                         shape_str(high.shape()) + ", low " + shape_str(low.shape()) +
                         ", expected " + std::to_string(channels) + " channels");
    }
    Tensor f_up = bilinear_upsample(high, low.dim(2), low.dim(3));
    if (sum_fusion) return add(f_up, low);
    Tensor alpha;
    switch (attention) {
        case AttentionKind::Spatial:
            alpha = spatial_attention(f_up, low, *attention_conv, /*include_max=*/true);
            break;
        case AttentionKind::SpatialNoMax:
            alpha = spatial_attention(f_up, low, *attention_conv, /*include_max=*/false);
            break;
        case AttentionKind::Channel:
            alpha = channel_attention(f_up, low, *attention_conv);
            break;
        case AttentionKind::None:
            alpha = Tensor::full({f_up.dim(0), 1, f_up.dim(2), f_up.dim(3)}, 0.5f);
            break;
    }
    return uafm_blend(f_up, low, alpha);
}

void UafmBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    if (high_proj) high_proj->collect(prefix + ".high_proj", out);
    if (low_proj) low_proj->collect(prefix + ".low_proj", out);
    if (attention_conv) attention_conv->collect(prefix + ".attention_conv", out);
}

Tensor uafm_fuse(const Tensor& f_high, const Tensor& f_low, UafmBlock& block, bool training) {
    return block.forward(f_high, f_low, training);
}

SppmBlock SppmBlock::create(int in_channels, int inter_channels, int out_channels, Rng& rng) {
    if (inter_channels >= in_channels || out_channels >= in_channels) {
        throw ConfigError("sppm channels must shrink: in " + std::to_string(in_channels) +
                          ", inter " + std::to_string(inter_channels) + ", out " +
                          std::to_string(out_channels));
    }
    SppmBlock block;
    block.inter_channels = inter_channels;
    block.out_channels = out_channels;
    for (auto& branch : block.branch_convs) {
        branch = ConvBNReLU::create(in_channels, inter_channels, 1, 1, 0, true, rng);
    }
    block.fuse_conv = ConvBNReLU::create(inter_channels, out_channels, 3, 1, 1, true, rng);
    return block;
}

Tensor SppmBlock::forward(const Tensor& x, bool training) {
    const int h = x.dim(2), w = x.dim(3);
    if (h < 1 || w < 1) throw ShapeError("sppm input must be non-empty, got " + shape_str(x.shape()));
    Tensor acc;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        // Clamp per axis so a 2x4 deep feature still supports the 4x4 bin.
        int bh = std::min(bins[i], h);
        int bw = std::min(bins[i], w);
        Tensor pooled = adaptive_avg_pool(x, bh, bw);
        Tensor reduced = branch_convs[i].forward(pooled, training);
        Tensor up = bilinear_upsample(reduced, h, w);
        acc = acc.defined() ? add(acc, up) : up;
    }
    return fuse_conv.forward(acc, training);
}

void SppmBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    for (std::size_t i = 0; i < branch_convs.size(); ++i) {
        branch_convs[i].collect(prefix + ".branch" + std::to_string(i), out);
    }
    fuse_conv.collect(prefix + ".fuse", out);
}

Tensor sppm_forward(const Tensor& x, SppmBlock& block, bool training) {
    return block.forward(x, training);
}

SegHead SegHead::create(int in_channels, int mid_channels, int num_classes, Rng& rng) {
    if (num_classes < 2) throw ConfigError("segmentation head needs at least 2 classes");
    SegHead head;
    head.mid_conv = ConvBNReLU::create(in_channels, mid_channels, 3, 1, 1, true, rng);
    head.classifier = Conv2d::create(mid_channels, num_classes, 1, 1, 0, /*with_bias=*/true, rng);
    return head;
}

Tensor SegHead::forward(const Tensor& x, int out_h, int out_w, bool training) {
    Tensor logits = classifier.forward(mid_conv.forward(x, training));
    return bilinear_upsample(logits, out_h, out_w);
}

void SegHead::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    mid_conv.collect(prefix + ".mid", out);
    classifier.collect(prefix + ".classifier", out);
}

Tensor seg_head_forward(const Tensor& x, SegHead& head, int out_h, int out_w, bool training) {
    return head.forward(x, out_h, out_w, training);
}

}  // namespace liteseg
