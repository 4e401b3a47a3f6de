#include "liteseg/encoder.hpp"

namespace liteseg {

EncoderConfig EncoderConfig::preset(const std::string& name) {
    EncoderConfig cfg;
    if (name == "encoder-t") {
        cfg.stage_channels = {32, 64, 256, 512, 1024};
        cfg.blocks_per_stage = {1, 1, 2, 2, 2};
    } else if (name == "encoder-b") {
        cfg.stage_channels = {32, 64, 256, 512, 1024};
        cfg.blocks_per_stage = {1, 1, 4, 5, 3};
    } else if (name == "encoder-tiny") {
        cfg.stage_channels = {16, 32, 64, 128, 256};
        cfg.blocks_per_stage = {1, 1, 1, 1, 1};
    } else {
        throw ConfigError("unknown encoder preset '" + name + "'");
    }
    return cfg;
}

void EncoderConfig::validate() const {
    if (input_channels < 1) throw ConfigError("encoder input_channels must be positive");
    for (std::size_t i = 0; i < stage_channels.size(); ++i) {
        if (stage_channels[i] < 1) throw ConfigError("encoder stage channels must be positive");
        if (blocks_per_stage[i] < 1) throw ConfigError("encoder blocks per stage must be >= 1");
        if (i > 0 && stage_channels[i] < stage_channels[i - 1]) {
            throw ConfigError("encoder stage channels must be nondecreasing");
        }
    }
}

ResidualBlock ResidualBlock::create(int channels, Rng& rng) {
    ResidualBlock block;
    block.conv = Conv2d::create(channels, channels, 3, 1, 1, /*with_bias=*/false, rng);
    block.bn = BatchNorm2d::create(channels);
    return block;
}

Tensor ResidualBlock::forward(const Tensor& x, bool training) {
    return relu(add(x, bn.forward(conv.forward(x), training)));
}

void ResidualBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    conv.collect(prefix + ".conv", out);
    bn.collect(prefix + ".bn", out);
}

Tensor EncoderStage::forward(const Tensor& x, bool training) {
    Tensor y = down.forward(x, training);
    for (ResidualBlock& block : blocks) y = block.forward(y, training);
    return y;
}

void EncoderStage::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    down.collect(prefix + ".down", out);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].collect(prefix + ".block" + std::to_string(i), out);
    }
}

Encoder Encoder::create(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    Encoder encoder;
    encoder.cfg = cfg;
    int in_c = cfg.input_channels;
    for (std::size_t s = 0; s < encoder.stages.size(); ++s) {
        EncoderStage& stage = encoder.stages[s];
        stage.down = ConvBNReLU::create(in_c, cfg.stage_channels[s], 3, 2, 1, true, rng);
        for (int b = 1; b < cfg.blocks_per_stage[s]; ++b) {
            stage.blocks.push_back(ResidualBlock::create(cfg.stage_channels[s], rng));
        }
        in_c = cfg.stage_channels[s];
    }
    return encoder;
}

FeaturePyramid Encoder::forward(const Tensor& image, bool training) {
    if (image.ndim() != 4 || image.dim(1) != cfg.input_channels) {
        throw ShapeError("encoder expects [N," + std::to_string(cfg.input_channels) +
                         ",H,W] input, got " + shape_str(image.shape()));
    }
    const int h = image.dim(2), w = image.dim(3);
    if (h % 32 != 0 || w % 32 != 0) {
        throw ShapeError("encoder input size " + std::to_string(h) + "x" + std::to_string(w) +
                         " must be divisible by 32; pad or resize the image first");
    }
    FeaturePyramid fp;
    Tensor y = stages[0].forward(image, training);
    fp.f2 = y;
    y = stages[1].forward(y, training);
    fp.f4 = y;
    y = stages[2].forward(y, training);
    fp.f8 = y;
    y = stages[3].forward(y, training);
    fp.f16 = y;
    y = stages[4].forward(y, training);
    fp.f32 = y;
    return fp;
}

void Encoder::collect(const std::string& prefix, std::vector<ParamRef>& out) const {
    for (std::size_t s = 0; s < stages.size(); ++s) {
        stages[s].collect(prefix + ".stage" + std::to_string(s + 1), out);
    }
}

FeaturePyramid encoder_forward(Encoder& encoder, const Tensor& image, bool training) {
    return encoder.forward(image, training);
}

}  // namespace liteseg
