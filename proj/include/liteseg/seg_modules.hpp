#pragma once

#include <array>
#include <optional>
#include <string>

#include "liteseg/nn.hpp"

namespace liteseg {

// Attention plugin for the fusion module. None fixes the fusion weight at 0.5
// (plain averaging, the ablation baseline).
enum class AttentionKind { Spatial, SpatialNoMax, Channel, None };

std::string attention_kind_name(AttentionKind kind);
AttentionKind attention_kind_from_name(const std::string& name);

// alpha = Sigmoid(Conv(Concat(Mean(F_up), Max(F_up), Mean(F_low), Max(F_low))))
// -> [N,1,H,W]. When include_max is false only the two means are used.
Tensor spatial_attention(const Tensor& f_up, const Tensor& f_low, const Conv2d& conv,
                         bool include_max = true);

// alpha = Sigmoid(Conv(Concat(AvgPool(F_up), MaxPool(F_up), AvgPool(F_low),
// MaxPool(F_low)))) -> [N,C,1,1]; the concatenated pooled feature has 4C
// channels at 1x1.
Tensor channel_attention(const Tensor& f_up, const Tensor& f_low, const Conv2d& conv);

// F_up * alpha + F_low * (1 - alpha). alpha broadcasts as [N,1,H,W] or
// [N,C,1,1].
Tensor uafm_blend(const Tensor& f_up, const Tensor& f_low, const Tensor& alpha);

// Attention fusion of a deeper feature with an encoder skip feature. Both
// sides are projected to `channels` when their widths differ; the deeper
// feature is bilinearly upsampled to the skip resolution before fusion.
struct UafmBlock {
    int channels = 0;
    AttentionKind attention = AttentionKind::Spatial;
    bool sum_fusion = false;  // ablation: plain F_up + F_low

    std::optional<ConvBNReLU> high_proj;      // 1x1 reduce of the deeper feature
    std::optional<ConvBNReLU> low_proj;       // 1x1 Conv+BN (no ReLU) on the skip
    std::optional<Conv2d> attention_conv;     // absent for AttentionKind::None

    static UafmBlock create(int high_channels, int low_channels, int channels,
                            AttentionKind attention, bool sum_fusion, Rng& rng);

    Tensor forward(const Tensor& f_high, const Tensor& f_low, bool training);
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
};

Tensor uafm_fuse(const Tensor& f_high, const Tensor& f_low, UafmBlock& block, bool training);

// Pyramid pooling with bins 1x1, 2x2, 4x4; branch outputs are summed (never
// concatenated) and refined by a 3x3 conv. Bins larger than the input extent
// are clamped per axis so small feature maps remain valid.
struct SppmBlock {
    std::array<int, 3> bins{1, 2, 4};
    std::array<ConvBNReLU, 3> branch_convs;  // 1x1, inter_channels out
    ConvBNReLU fuse_conv;                    // 3x3, out_channels out
    int inter_channels = 0;
    int out_channels = 0;

    static SppmBlock create(int in_channels, int inter_channels, int out_channels, Rng& rng);

    Tensor forward(const Tensor& x, bool training);
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
};

Tensor sppm_forward(const Tensor& x, SppmBlock& block, bool training);

// 3x3 Conv-BN-ReLU, 1x1 classifier to num_classes, bilinear upsample to the
// requested output size.
struct SegHead {
    ConvBNReLU mid_conv;
    Conv2d classifier;

    static SegHead create(int in_channels, int mid_channels, int num_classes, Rng& rng);

    Tensor forward(const Tensor& x, int out_h, int out_w, bool training);
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
    int num_classes() const { return classifier.out_channels(); }
};

Tensor seg_head_forward(const Tensor& x, SegHead& head, int out_h, int out_w, bool training);

}  // namespace liteseg
