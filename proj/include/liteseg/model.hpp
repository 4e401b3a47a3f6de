#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>

#include "liteseg/encoder.hpp"
#include "liteseg/label_map.hpp"
#include "liteseg/seg_modules.hpp"

namespace liteseg {

struct SppmChannels {
    int inter_channels = 128;
    int out_channels = 128;
};

struct ModelConfig {
    std::string encoder = "encoder-t";
    std::array<int, 3> decoder_channels{32, 64, 128};  // low -> high
    int num_classes = 19;
    SppmChannels sppm;
    AttentionKind attention = AttentionKind::Spatial;
    bool use_sppm = true;      // false: 1x1 conv bypass to decoder_channels[2]
    bool sum_fusion = false;   // ablation: fusion by plain summation

    // "ppliteseg-t", "ppliteseg-b" (19 classes) or "tiny" (4 classes).
    static ModelConfig preset(const std::string& name);
    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);

    bool operator==(const ModelConfig& other) const;
};

// Encoder -> SPPM on the 1/32 feature -> UAFM(high, f16) -> UAFM(. , f8) ->
// segmentation head at 1/8 scale upsampled to the input size.
class PPLiteSeg {
  public:
    PPLiteSeg(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // logits [N, num_classes, H, W]; H, W divisible by 32.
    Tensor forward(const Tensor& image, bool training = false);
    // Per-pixel argmax; ties break toward the lowest class index. Runs with
    // gradients disabled.
    LabelMap predict(const Tensor& image);

    std::vector<ParamRef> named_parameters() const;
    std::int64_t num_parameters(bool trainable_only = true) const;

    Encoder& encoder() { return encoder_; }
    SppmBlock* sppm() { return sppm_ ? &*sppm_ : nullptr; }
    UafmBlock& fuse_high() { return fuse_high_; }
    UafmBlock& fuse_low() { return fuse_low_; }
    SegHead& head() { return head_; }

  private:
    ModelConfig cfg_;
    Encoder encoder_;
    std::optional<SppmBlock> sppm_;
    std::optional<ConvBNReLU> sppm_bypass_;
    UafmBlock fuse_high_;  // SPPM output vs f16, decoder_channels[1] wide
    UafmBlock fuse_low_;   // previous fusion vs f8, decoder_channels[0] wide
    SegHead head_;
};

PPLiteSeg build_model(const ModelConfig& cfg, std::uint64_t seed);

// Per-pixel argmax over the class axis of [N,K,H,W] logits, lowest index wins
// ties.
LabelMap argmax_labels(const Tensor& logits);

}  // namespace liteseg
