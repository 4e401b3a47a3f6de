#include "liteseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace liteseg {

std::int64_t OhemConfig::effective_min_kept(std::int64_t batch_pixels) const {
    std::int64_t kept = min_kept > 0 ? min_kept : batch_pixels / 16;
    if (kept < 1) kept = 1;
    if (kept > batch_pixels) {
        throw ConfigError("ohem min_kept " + std::to_string(kept) + " exceeds batch pixels " +
                          std::to_string(batch_pixels));
    }
    return kept;
}

Tensor ohem_cross_entropy(const Tensor& logits, const LabelMap& labels, const OhemConfig& cfg) {
    if (logits.ndim() != 4) {
        throw ShapeError("ohem_cross_entropy expects [N,K,H,W] logits, got " +
                         shape_str(logits.shape()));
    }
    const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    if (labels.n != n || labels.h != h || labels.w != w) {
        throw ShapeError("labels " + std::to_string(labels.n) + "x" + std::to_string(labels.h) +
                         "x" + std::to_string(labels.w) + " do not match logits " +
                         shape_str(logits.shape()));
    }
    if (cfg.prob_threshold <= 0.0f || cfg.prob_threshold > 1.0f) {
        throw ConfigError("ohem prob_threshold must be in (0, 1]");
    }
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t pixels = static_cast<std::int64_t>(n) * plane;
    const std::int64_t min_kept = cfg.effective_min_kept(pixels);

    // Per valid pixel: stable softmax in double, CE loss and true-class prob.
    const float* ld = logits.data();
    std::vector<std::int64_t> valid;       // pixel index n*plane + i
    std::vector<double> pixel_loss;
    std::vector<double> true_prob;
    valid.reserve(static_cast<std::size_t>(pixels));
    for (int ni = 0; ni < n; ++ni) {
        const float* base = ld + static_cast<std::int64_t>(ni) * k * plane;
        const std::uint8_t* lab = labels.values.data() + static_cast<std::int64_t>(ni) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            std::uint8_t y = lab[i];
            if (y == cfg.ignore_index) continue;
            if (y >= k) {
                throw ShapeError("label value " + std::to_string(y) + " out of range for " +
                                 std::to_string(k) + " classes");
            }
            double maxv = base[i];
            for (int c = 1; c < k; ++c) {
                maxv = std::max(maxv, static_cast<double>(base[static_cast<std::int64_t>(c) * plane + i]));
            }
            double denom = 0.0;
            for (int c = 0; c < k; ++c) {
                denom += std::exp(static_cast<double>(base[static_cast<std::int64_t>(c) * plane + i]) - maxv);
            }
            double logit_y = base[static_cast<std::int64_t>(y) * plane + i];
            double log_p = (logit_y - maxv) - std::log(denom);
            valid.push_back(static_cast<std::int64_t>(ni) * plane + i);
            pixel_loss.push_back(-log_p);
            true_prob.push_back(std::exp(log_p));
        }
    }
    if (valid.empty()) {
        throw ShapeError("ohem_cross_entropy: every pixel is ignored (empty batch)");
    }

    // Mining: threshold first, then top-up to min_kept hardest.
    std::vector<std::size_t> kept;
    kept.reserve(valid.size());
    for (std::size_t i = 0; i < valid.size(); ++i) {
        if (true_prob[i] < static_cast<double>(cfg.prob_threshold)) kept.push_back(i);
    }
    const std::int64_t want = std::min<std::int64_t>(min_kept, static_cast<std::int64_t>(valid.size()));
    if (static_cast<std::int64_t>(kept.size()) < want) {
        std::vector<std::size_t> order(valid.size());
        std::iota(order.begin(), order.end(), 0);
        // Deterministic: loss descending, pixel index ascending on ties.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (pixel_loss[a] != pixel_loss[b]) return pixel_loss[a] > pixel_loss[b];
            return a < b;
        });
        kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(want));
        std::sort(kept.begin(), kept.end());
    }

    double total = 0.0;
    for (std::size_t i : kept) total += pixel_loss[i];
    const double mean_loss = total / static_cast<double>(kept.size());

    // Kept pixel indices and labels are all the backward pass needs; softmax
    // is recomputed there in float.
    std::vector<std::int64_t> kept_pixels(kept.size());
    std::vector<std::uint8_t> kept_labels(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        kept_pixels[i] = valid[kept[i]];
        kept_labels[i] = labels.values[static_cast<std::size_t>(valid[kept[i]])];
    }

    Tensor out = Tensor::make_node(
        {1}, {logits}, [logits, kept_pixels, kept_labels, k, plane](detail::Node& self) {
            if (!logits.requires_grad()) return;
            auto& gx = Tensor(logits).grad_vec();
            const float* ld = logits.data();
            const float g = self.grad[0] / static_cast<float>(kept_pixels.size());
            for (std::size_t j = 0; j < kept_pixels.size(); ++j) {
                const std::int64_t pix = kept_pixels[j];
                const std::int64_t ni = pix / plane;
                const std::int64_t i = pix % plane;
                const float* base = ld + ni * k * plane + i;
                float maxv = base[0];
                for (int c = 1; c < k; ++c) {
                    maxv = std::max(maxv, base[static_cast<std::int64_t>(c) * plane]);
                }
                float denom = 0.0f;
                for (int c = 0; c < k; ++c) {
                    denom += std::exp(base[static_cast<std::int64_t>(c) * plane] - maxv);
                }
                float* gbase = gx.data() + ni * k * plane + i;
                for (int c = 0; c < k; ++c) {
                    float p = std::exp(base[static_cast<std::int64_t>(c) * plane] - maxv) / denom;
                    float delta = c == kept_labels[j] ? 1.0f : 0.0f;
                    gbase[static_cast<std::int64_t>(c) * plane] += g * (p - delta);
                }
            }
        });
    out.data()[0] = static_cast<float>(mean_loss);
    return out;
}

}  // namespace liteseg
