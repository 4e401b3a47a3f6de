#pragma once

#include <array>
#include <string>

#include "liteseg/nn.hpp"

namespace liteseg {

// Five-stage encoder; every stage downsamples by exactly 2, so the deepest
// feature is 1/32 of the input. Channels are nondecreasing stage to stage.
struct EncoderConfig {
    std::array<int, 5> stage_channels{32, 64, 256, 512, 1024};
    std::array<int, 5> blocks_per_stage{1, 1, 2, 2, 2};
    int input_channels = 3;

    // Presets: "encoder-t" (narrow/shallow), "encoder-b" (deeper),
    // "encoder-tiny" (desk-scale).
    static EncoderConfig preset(const std::string& name);
    void validate() const;
};

struct FeaturePyramid {
    Tensor f2, f4, f8, f16, f32;  // strides 2, 4, 8, 16, 32
};

// y = relu(x + bn(conv3x3(x))), stride 1, same channels.
struct ResidualBlock {
    Conv2d conv;
    BatchNorm2d bn;

    static ResidualBlock create(int channels, Rng& rng);
    Tensor forward(const Tensor& x, bool training);
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
};

struct EncoderStage {
    ConvBNReLU down;  // 3x3 stride 2
    std::vector<ResidualBlock> blocks;

    Tensor forward(const Tensor& x, bool training);
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
};

struct Encoder {
    EncoderConfig cfg;
    std::array<EncoderStage, 5> stages;

    static Encoder create(const EncoderConfig& cfg, Rng& rng);
    // Input spatial size must be divisible by 32.
    FeaturePyramid forward(const Tensor& image, bool training);
    void collect(const std::string& prefix, std::vector<ParamRef>& out) const;
};

FeaturePyramid encoder_forward(Encoder& encoder, const Tensor& image, bool training);

}  // namespace liteseg
