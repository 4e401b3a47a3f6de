#include "liteseg/augment.hpp"

#include <algorithm>
#include <cmath>

namespace liteseg {

void AugmentConfig::validate() const {
    if (scale_range[0] > scale_range[1] || scale_range[0] <= 0.0f) {
        throw ConfigError("augment scale_range must satisfy 0 < lo <= hi");
    }
    if (crop_h % 32 != 0 || crop_w % 32 != 0) {
        throw ConfigError("augment crop size must be divisible by 32");
    }
    if (hflip_prob < 0.0f || hflip_prob > 1.0f) throw ConfigError("hflip_prob must be in [0,1]");
    if (jitter < 0.0f || jitter >= 1.0f) throw ConfigError("jitter must be in [0,1)");
    for (float s : std) {
        if (s <= 0.0f) throw ConfigError("normalization std must be positive");
    }
}

std::mt19937 derive_rng(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 over seed ^ stream
    std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z = z ^ (z >> 31);
    return std::mt19937(static_cast<std::uint32_t>(z ^ (z >> 32)));
}

Tensor resize_image_bilinear(const Tensor& image, int out_h, int out_w) {
    if (image.ndim() != 3) {
        throw ShapeError("resize_image_bilinear expects [C,H,W], got " + shape_str(image.shape()));
    }
    if (out_h < 1 || out_w < 1) throw ShapeError("resize target must be positive");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out = Tensor::zeros({c, out_h, out_w});
    const float* src = image.data();
    float* dst = out.data();
    const double sh = static_cast<double>(h) / out_h;
    const double sw = static_cast<double>(w) / out_w;
    for (int ci = 0; ci < c; ++ci) {
        const float* plane = src + static_cast<std::int64_t>(ci) * h * w;
        float* oplane = dst + static_cast<std::int64_t>(ci) * out_h * out_w;
        for (int oh = 0; oh < out_h; ++oh) {
            double fy = std::max(0.0, (oh + 0.5) * sh - 0.5);
            int y0 = std::min(static_cast<int>(fy), h - 1);
            int y1 = std::min(y0 + 1, h - 1);
            float wy = static_cast<float>(fy - y0);
            for (int ow = 0; ow < out_w; ++ow) {
                double fx = std::max(0.0, (ow + 0.5) * sw - 0.5);
                int x0 = std::min(static_cast<int>(fx), w - 1);
                int x1 = std::min(x0 + 1, w - 1);
                float wx = static_cast<float>(fx - x0);
                float top = plane[static_cast<std::int64_t>(y0) * w + x0] * (1.0f - wx) +
                            plane[static_cast<std::int64_t>(y0) * w + x1] * wx;
                float bot = plane[static_cast<std::int64_t>(y1) * w + x0] * (1.0f - wx) +
                            plane[static_cast<std::int64_t>(y1) * w + x1] * wx;
                oplane[static_cast<std::int64_t>(oh) * out_w + ow] = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

LabelMap resize_labels_nearest(const LabelMap& labels, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("resize target must be positive");
    LabelMap out(labels.n, out_h, out_w);
    const double sh = static_cast<double>(labels.h) / out_h;
    const double sw = static_cast<double>(labels.w) / out_w;
    for (int n = 0; n < labels.n; ++n) {
        for (int oh = 0; oh < out_h; ++oh) {
            int y = std::min(static_cast<int>((oh + 0.5) * sh), labels.h - 1);
            for (int ow = 0; ow < out_w; ++ow) {
                int x = std::min(static_cast<int>((ow + 0.5) * sw), labels.w - 1);
                out.at(n, oh, ow) = labels.at(n, y, x);
            }
        }
    }
    return out;
}

namespace {

Sample pad_to(const Sample& s, int min_h, int min_w, const std::array<float, 3>& mean) {
    const int h = s.image.dim(1), w = s.image.dim(2);
    const int nh = std::max(h, min_h), nw = std::max(w, min_w);
    if (nh == h && nw == w) return s;
    Sample out;
    out.image = Tensor::zeros({3, nh, nw});
    out.label = LabelMap(1, nh, nw, kIgnoreLabel);
    for (int c = 0; c < 3; ++c) {
        float* dst = out.image.data() + static_cast<std::int64_t>(c) * nh * nw;
        const float* src = s.image.data() + static_cast<std::int64_t>(c) * h * w;
        for (int y = 0; y < nh; ++y) {
            for (int x = 0; x < nw; ++x) {
                // Padding holds the channel mean so it normalizes to zero.
                dst[static_cast<std::int64_t>(y) * nw + x] =
                    (y < h && x < w) ? src[static_cast<std::int64_t>(y) * w + x] : mean[c];
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) out.label.at(0, y, x) = s.label.at(0, y, x);
    }
    return out;
}

Sample crop(const Sample& s, int oy, int ox, int ch, int cw) {
    Sample out;
    out.image = Tensor::zeros({3, ch, cw});
    out.label = LabelMap(1, ch, cw);
    const int h = s.image.dim(1), w = s.image.dim(2);
    for (int c = 0; c < 3; ++c) {
        const float* src = s.image.data() + static_cast<std::int64_t>(c) * h * w;
        float* dst = out.image.data() + static_cast<std::int64_t>(c) * ch * cw;
        for (int y = 0; y < ch; ++y) {
            std::copy(src + static_cast<std::int64_t>(oy + y) * w + ox,
                      src + static_cast<std::int64_t>(oy + y) * w + ox + cw,
                      dst + static_cast<std::int64_t>(y) * cw);
        }
    }
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) out.label.at(0, y, x) = s.label.at(0, oy + y, ox + x);
    }
    return out;
}

void hflip_inplace(Sample& s) {
    const int h = s.image.dim(1), w = s.image.dim(2);
    for (int c = 0; c < 3; ++c) {
        float* plane = s.image.data() + static_cast<std::int64_t>(c) * h * w;
        for (int y = 0; y < h; ++y) {
            std::reverse(plane + static_cast<std::int64_t>(y) * w,
                         plane + static_cast<std::int64_t>(y) * w + w);
        }
    }
    for (int y = 0; y < h; ++y) {
        std::uint8_t* row = s.label.values.data() + static_cast<std::size_t>(y) * w;
        std::reverse(row, row + w);
    }
}

void jitter_inplace(Sample& s, float jitter, std::mt19937& rng) {
    std::uniform_real_distribution<float> factor(1.0f - jitter, 1.0f + jitter);
    const float fb = factor(rng), fc = factor(rng), fs = factor(rng);
    const int h = s.image.dim(1), w = s.image.dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    float* r = s.image.data();
    float* g = r + plane;
    float* b = g + plane;
    auto clamp01 = [](float v) { return std::min(1.0f, std::max(0.0f, v)); };

    double gray_sum = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) {
        r[i] = clamp01(r[i] * fb);
        g[i] = clamp01(g[i] * fb);
        b[i] = clamp01(b[i] * fb);
        gray_sum += 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    }
    const float gray_mean = static_cast<float>(gray_sum / static_cast<double>(plane));
    for (std::int64_t i = 0; i < plane; ++i) {
        r[i] = clamp01(gray_mean + fc * (r[i] - gray_mean));
        g[i] = clamp01(gray_mean + fc * (g[i] - gray_mean));
        b[i] = clamp01(gray_mean + fc * (b[i] - gray_mean));
        float gray = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
        r[i] = clamp01(gray + fs * (r[i] - gray));
        g[i] = clamp01(gray + fs * (g[i] - gray));
        b[i] = clamp01(gray + fs * (b[i] - gray));
    }
}

void normalize_inplace(Sample& s, const AugmentConfig& cfg) {
    const std::int64_t plane = static_cast<std::int64_t>(s.image.dim(1)) * s.image.dim(2);
    for (int c = 0; c < 3; ++c) {
        float* p = s.image.data() + static_cast<std::int64_t>(c) * plane;
        const float m = cfg.mean[static_cast<std::size_t>(c)];
        const float inv = 1.0f / cfg.std[static_cast<std::size_t>(c)];
        for (std::int64_t i = 0; i < plane; ++i) p[i] = (p[i] - m) * inv;
    }
}

}  // namespace

Sample augment(const Sample& sample, const AugmentConfig& cfg, std::mt19937& rng) {
    cfg.validate();
    if (sample.image.ndim() != 3 || sample.image.dim(0) != 3) {
        throw ShapeError("augment expects a [3,H,W] image, got " + shape_str(sample.image.shape()));
    }
    if (sample.label.n != 1 || sample.label.h != sample.image.dim(1) ||
        sample.label.w != sample.image.dim(2)) {
        throw ShapeError("augment label does not align with the image");
    }

    Sample s = sample;
    std::uniform_real_distribution<float> scale_dist(cfg.scale_range[0], cfg.scale_range[1]);
    const float scale = scale_dist(rng);
    if (scale != 1.0f) {
        int nh = std::max(1, static_cast<int>(std::lround(s.image.dim(1) * scale)));
        int nw = std::max(1, static_cast<int>(std::lround(s.image.dim(2) * scale)));
        s.image = resize_image_bilinear(s.image, nh, nw);
        s.label = resize_labels_nearest(s.label, nh, nw);
    }

    s = pad_to(s, cfg.crop_h, cfg.crop_w, cfg.mean);

    const int max_oy = s.image.dim(1) - cfg.crop_h;
    const int max_ox = s.image.dim(2) - cfg.crop_w;
    int oy = 0, ox = 0;
    if (max_oy > 0) oy = std::uniform_int_distribution<int>(0, max_oy)(rng);
    if (max_ox > 0) ox = std::uniform_int_distribution<int>(0, max_ox)(rng);
    if (max_oy > 0 || max_ox > 0 || s.image.dim(1) != cfg.crop_h || s.image.dim(2) != cfg.crop_w) {
        s = crop(s, oy, ox, cfg.crop_h, cfg.crop_w);
    }

    if (cfg.hflip_prob > 0.0f &&
        std::uniform_real_distribution<float>(0.0f, 1.0f)(rng) < cfg.hflip_prob) {
        hflip_inplace(s);
    }
    if (cfg.jitter > 0.0f) jitter_inplace(s, cfg.jitter, rng);
    normalize_inplace(s, cfg);
    return s;
}

Sample normalize_sample(const Sample& sample, const AugmentConfig& cfg) {
    Sample s;
    s.image = Tensor::from_vector(sample.image.shape(), sample.image.vec());
    s.label = sample.label;
    normalize_inplace(s, cfg);
    return s;
}

std::pair<Tensor, LabelMap> stack_samples(const std::vector<Sample>& samples) {
    if (samples.empty()) throw ShapeError("cannot stack an empty batch");
    const int h = samples.front().image.dim(1);
    const int w = samples.front().image.dim(2);
    const int n = static_cast<int>(samples.size());
    Tensor images = Tensor::zeros({n, 3, h, w});
    LabelMap labels(n, h, w);
    const std::int64_t sample_len = static_cast<std::int64_t>(3) * h * w;
    for (int i = 0; i < n; ++i) {
        const Sample& s = samples[static_cast<std::size_t>(i)];
        if (s.image.dim(1) != h || s.image.dim(2) != w) {
            throw ShapeError("stack_samples requires equal sample sizes");
        }
        std::copy(s.image.data(), s.image.data() + sample_len,
                  images.data() + static_cast<std::int64_t>(i) * sample_len);
        std::copy(s.label.values.begin(), s.label.values.end(),
                  labels.values.begin() + static_cast<std::int64_t>(i) * h * w);
    }
    return {images, labels};
}

}  // namespace liteseg
