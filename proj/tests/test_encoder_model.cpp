#include <doctest.h>

#include <random>

#include "liteseg/model.hpp"
#include "ref_ops.hpp"

using namespace liteseg;

namespace {

Tensor random_tensor(const Shape& shape, std::uint32_t seed, float lo = -1.0f, float hi = 1.0f) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    Tensor t = Tensor::zeros(shape);
    for (float& v : t.vec()) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("encoder: tiny preset produces the five stride features") {
    Rng rng(3);
    Encoder enc = Encoder::create(EncoderConfig::preset("encoder-tiny"), rng);
    FeaturePyramid fp = enc.forward(Tensor::zeros({1, 3, 64, 128}), false);
    CHECK(shape_eq(fp.f2.shape(), {1, 16, 32, 64}));
    CHECK(shape_eq(fp.f4.shape(), {1, 32, 16, 32}));
    CHECK(shape_eq(fp.f8.shape(), {1, 64, 8, 16}));
    CHECK(shape_eq(fp.f16.shape(), {1, 128, 4, 8}));
    CHECK(shape_eq(fp.f32.shape(), {1, 256, 2, 4}));
}

TEST_CASE("encoder: random configs honor the stride and width contract") {
    std::mt19937 meta(7);
    for (int trial = 0; trial < 3; ++trial) {
        EncoderConfig cfg;
        int c = std::uniform_int_distribution<int>(4, 8)(meta);
        for (std::size_t s = 0; s < 5; ++s) {
            cfg.stage_channels[s] = c;
            c += std::uniform_int_distribution<int>(0, 8)(meta);
            cfg.blocks_per_stage[s] = std::uniform_int_distribution<int>(1, 2)(meta);
        }
        Rng rng(static_cast<std::uint64_t>(trial));
        Encoder enc = Encoder::create(cfg, rng);
        FeaturePyramid fp = enc.forward(Tensor::zeros({2, 3, 64, 64}), false);
        const Tensor* feats[5] = {&fp.f2, &fp.f4, &fp.f8, &fp.f16, &fp.f32};
        int expect = 32;
        for (std::size_t s = 0; s < 5; ++s) {
            CHECK(feats[s]->dim(1) == cfg.stage_channels[s]);
            CHECK(feats[s]->dim(2) == expect);
            CHECK(feats[s]->dim(3) == expect);
            expect /= 2;
        }
    }
}

TEST_CASE("encoder: input size must be divisible by 32") {
    Rng rng(4);
    Encoder enc = Encoder::create(EncoderConfig::preset("encoder-tiny"), rng);
    CHECK_THROWS_WITH_AS(enc.forward(Tensor::zeros({1, 3, 50, 60}), false),
                         doctest::Contains("divisible by 32"), ShapeError);
}

TEST_CASE("encoder: config validation") {
    EncoderConfig bad = EncoderConfig::preset("encoder-tiny");
    bad.stage_channels = {32, 16, 64, 128, 256};  // decreasing
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = EncoderConfig::preset("encoder-tiny");
    bad.blocks_per_stage[2] = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(EncoderConfig::preset("encoder-x"), ConfigError);
}

TEST_CASE("encoder: parameter count is a pure function of the config") {
    auto count = [](std::uint64_t seed) {
        Rng rng(seed);
        Encoder enc = Encoder::create(EncoderConfig::preset("encoder-tiny"), rng);
        std::vector<ParamRef> params;
        enc.collect("encoder", params);
        return count_parameters(params);
    };
    CHECK(count(1) == count(2));
    CHECK(count(1) == count(1));
}

TEST_CASE("model: Table-1 variants wire the decoder taper") {
    ModelConfig t = ModelConfig::preset("ppliteseg-t");
    CHECK(t.decoder_channels == std::array<int, 3>{32, 64, 128});
    CHECK(t.num_classes == 19);
    CHECK(t.sppm.out_channels == 128);

    ModelConfig b = ModelConfig::preset("ppliteseg-b");
    CHECK(b.decoder_channels == std::array<int, 3>{64, 96, 128});
    CHECK(b.encoder == "encoder-b");

    // the fusion widths follow decoder_channels high -> low
    PPLiteSeg tiny(ModelConfig::preset("tiny"), 0);
    CHECK(tiny.fuse_high().channels == 32);
    CHECK(tiny.fuse_low().channels == 16);
    CHECK(tiny.sppm() != nullptr);
    CHECK(tiny.sppm()->out_channels == 64);
}

TEST_CASE("model: tiny forward produces full-resolution logits deterministically") {
    PPLiteSeg model(ModelConfig::preset("tiny"), 9);
    Tensor image = random_tensor({1, 3, 64, 128}, 31);
    NoGradGuard guard;
    Tensor a = model.forward(image, false);
    CHECK(shape_eq(a.shape(), {1, 4, 64, 128}));
    Tensor b = model.forward(image, false);
    CHECK(a.vec() == b.vec());
}

TEST_CASE("model: 19-class tiny-encoder variant emits labels within range") {
    ModelConfig cfg = ModelConfig::preset("tiny");
    cfg.num_classes = 19;
    PPLiteSeg model(cfg, 10);
    Tensor image = random_tensor({1, 3, 64, 128}, 32);
    LabelMap labels = model.predict(image);
    for (std::uint8_t v : labels.values) CHECK(v <= 18);
}

TEST_CASE("argmax: ties break toward the lowest class index") {
    Tensor constant = Tensor::full({1, 4, 2, 2}, 0.3f);
    LabelMap labels = argmax_labels(constant);
    for (std::uint8_t v : labels.values) CHECK(v == 0);

    Tensor logits = random_tensor({2, 5, 4, 4}, 33);
    LabelMap got = argmax_labels(logits);
    LabelMap want = ref::argmax_labels(ref::from_tensor(logits));
    CHECK(got.values == want.values);
}

TEST_CASE("model config: JSON round trip and validation") {
    ModelConfig cfg = ModelConfig::preset("ppliteseg-b");
    cfg.attention = AttentionKind::Channel;
    cfg.sum_fusion = true;
    ModelConfig back = ModelConfig::from_json(cfg.to_json());
    CHECK(back == cfg);

    ModelConfig bad = ModelConfig::preset("tiny");
    bad.decoder_channels = {32, 32, 64};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ModelConfig::preset("tiny");
    bad.sppm.out_channels = 32;  // must equal decoder_channels[2]
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_json("{not json"), ConfigError);

    // presets may be refined by explicit fields
    ModelConfig refined = ModelConfig::from_json(R"({"preset": "tiny", "attention": "none"})");
    CHECK(refined.attention == AttentionKind::None);
    CHECK(refined.encoder == "encoder-tiny");
}

TEST_CASE("model: ablation combinations build, run, and differ in size") {
    std::vector<std::int64_t> counts;
    Tensor image = random_tensor({1, 3, 64, 128}, 34);
    for (bool use_sppm : {true, false}) {
        for (AttentionKind kind : {AttentionKind::Spatial, AttentionKind::None}) {
            ModelConfig cfg = ModelConfig::preset("tiny");
            cfg.use_sppm = use_sppm;
            cfg.attention = kind;
            PPLiteSeg model(cfg, 11);
            NoGradGuard guard;
            CHECK(shape_eq(model.forward(image, false).shape(), {1, 4, 64, 128}));
            counts.push_back(model.num_parameters());
        }
    }
    std::sort(counts.begin(), counts.end());
    CHECK(std::adjacent_find(counts.begin(), counts.end()) == counts.end());
}
