#include "liteseg/model.hpp"

#include <json.hpp>

namespace liteseg {

ModelConfig ModelConfig::preset(const std::string& name) {
    ModelConfig cfg;
    if (name == "ppliteseg-t") {
        cfg.encoder = "encoder-t";
        cfg.decoder_channels = {32, 64, 128};
        cfg.num_classes = 19;
        cfg.sppm = {128, 128};
    } else if (name == "ppliteseg-b") {
        cfg.encoder = "encoder-b";
        cfg.decoder_channels = {64, 96, 128};
        cfg.num_classes = 19;
        cfg.sppm = {128, 128};
    } else if (name == "tiny") {
        cfg.encoder = "encoder-tiny";
        cfg.decoder_channels = {16, 32, 64};
        cfg.num_classes = 4;
        cfg.sppm = {32, 64};
    } else {
        throw ConfigError("unknown model preset '" + name + "'");
    }
    return cfg;
}

void ModelConfig::validate() const {
    EncoderConfig::preset(encoder).validate();
    if (!(decoder_channels[0] < decoder_channels[1] && decoder_channels[1] < decoder_channels[2])) {
        throw ConfigError("decoder_channels must be strictly increasing low->high");
    }
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (use_sppm && sppm.out_channels != decoder_channels[2]) {
        throw ConfigError("sppm out_channels (" + std::to_string(sppm.out_channels) +
                          ") must equal decoder_channels[2] (" +
                          std::to_string(decoder_channels[2]) + ")");
    }
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["encoder"] = encoder;
    j["decoder_channels"] = decoder_channels;
    j["num_classes"] = num_classes;
    j["sppm"] = {{"inter_channels", sppm.inter_channels}, {"out_channels", sppm.out_channels}};
    j["attention"] = attention_kind_name(attention);
    j["use_sppm"] = use_sppm;
    j["sum_fusion"] = sum_fusion;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model config JSON: ") + e.what());
    }
    ModelConfig cfg;
    try {
        if (j.contains("preset")) cfg = preset(j.at("preset").get<std::string>());
        if (j.contains("encoder")) cfg.encoder = j.at("encoder").get<std::string>();
        if (j.contains("decoder_channels")) {
            auto v = j.at("decoder_channels").get<std::vector<int>>();
            if (v.size() != 3) throw ConfigError("decoder_channels must have 3 entries");
            std::copy(v.begin(), v.end(), cfg.decoder_channels.begin());
        }
        if (j.contains("num_classes")) cfg.num_classes = j.at("num_classes").get<int>();
        if (j.contains("sppm")) {
            cfg.sppm.inter_channels = j.at("sppm").value("inter_channels", cfg.sppm.inter_channels);
            cfg.sppm.out_channels = j.at("sppm").value("out_channels", cfg.sppm.out_channels);
        }
        if (j.contains("attention")) {
            cfg.attention = attention_kind_from_name(j.at("attention").get<std::string>());
        }
        if (j.contains("use_sppm")) cfg.use_sppm = j.at("use_sppm").get<bool>();
        if (j.contains("sum_fusion")) cfg.sum_fusion = j.at("sum_fusion").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model config field: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

bool ModelConfig::operator==(const ModelConfig& other) const {
    return encoder == other.encoder && decoder_channels == other.decoder_channels &&
           num_classes == other.num_classes &&
           sppm.inter_channels == other.sppm.inter_channels &&
           sppm.out_channels == other.sppm.out_channels && attention == other.attention &&
           use_sppm == other.use_sppm && sum_fusion == other.sum_fusion;
}

PPLiteSeg::PPLiteSeg(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    EncoderConfig enc_cfg = EncoderConfig::preset(cfg_.encoder);
    encoder_ = Encoder::create(enc_cfg, rng);

    const int f32_c = enc_cfg.stage_channels[4];
    const int f16_c = enc_cfg.stage_channels[3];
    const int f8_c = enc_cfg.stage_channels[2];
    const int high_c = cfg_.decoder_channels[2];

    if (cfg_.use_sppm) {
        sppm_ = SppmBlock::create(f32_c, cfg_.sppm.inter_channels, cfg_.sppm.out_channels, rng);
    } else {
        sppm_bypass_ = ConvBNReLU::create(f32_c, high_c, 1, 1, 0, true, rng);
    }

    fuse_high_ = UafmBlock::create(high_c, f16_c, cfg_.decoder_channels[1], cfg_.attention,
                                   cfg_.sum_fusion, rng);
    fuse_low_ = UafmBlock::create(cfg_.decoder_channels[1], f8_c, cfg_.decoder_channels[0],
                                  cfg_.attention, cfg_.sum_fusion, rng);
    head_ = SegHead::create(cfg_.decoder_channels[0], cfg_.decoder_channels[0], cfg_.num_classes,
                            rng);
}

Tensor PPLiteSeg::forward(const Tensor& image, bool training) {
    FeaturePyramid fp = encoder_.forward(image, training);
    Tensor deep = sppm_ ? sppm_->forward(fp.f32, training) : sppm_bypass_->forward(fp.f32, training);
    Tensor fused = fuse_high_.forward(deep, fp.f16, training);
    fused = fuse_low_.forward(fused, fp.f8, training);
    return head_.forward(fused, image.dim(2), image.dim(3), training);
}

LabelMap PPLiteSeg::predict(const Tensor& image) {
    NoGradGuard guard;
    return argmax_labels(forward(image, /*training=*/false));
}

std::vector<ParamRef> PPLiteSeg::named_parameters() const {
    std::vector<ParamRef> out;
    encoder_.collect("encoder", out);
    if (sppm_) sppm_->collect("sppm", out);
    if (sppm_bypass_) sppm_bypass_->collect("sppm_bypass", out);
    fuse_high_.collect("fuse_high", out);
    fuse_low_.collect("fuse_low", out);
    head_.collect("head", out);
    return out;
}

std::int64_t PPLiteSeg::num_parameters(bool trainable_only) const {
    return count_parameters(named_parameters(), trainable_only);
}

PPLiteSeg build_model(const ModelConfig& cfg, std::uint64_t seed) { return PPLiteSeg(cfg, seed); }

LabelMap argmax_labels(const Tensor& logits) {
    if (logits.ndim() != 4) {
        throw ShapeError("argmax_labels expects [N,K,H,W] logits, got " +
                         shape_str(logits.shape()));
    }
    const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    if (k > 255) throw ConfigError("label maps support at most 255 classes");
    LabelMap labels(n, h, w);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const float* ld = logits.data();
    for (int ni = 0; ni < n; ++ni) {
        const float* base = ld + static_cast<std::int64_t>(ni) * k * plane;
        std::uint8_t* out = labels.values.data() + static_cast<std::int64_t>(ni) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            float best = base[i];
            int best_k = 0;
            for (int c = 1; c < k; ++c) {
                float v = base[static_cast<std::int64_t>(c) * plane + i];
                if (v > best) {
                    best = v;
                    best_k = c;
                }
            }
            out[i] = static_cast<std::uint8_t>(best_k);
        }
    }
    return labels;
}

}  // namespace liteseg
