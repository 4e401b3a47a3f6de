#pragma once

#include "liteseg/label_map.hpp"
#include "liteseg/tensor.hpp"

namespace liteseg {

// Online hard example mining over per-pixel cross entropy. Pixels whose
// true-class probability is below prob_threshold are kept; if fewer than
// min_kept qualify, the min_kept largest-loss pixels are kept instead. The
// loss is the mean over kept pixels. prob_threshold = 1 with min_kept covering
// the batch disables mining (plain mean cross entropy).
struct OhemConfig {
    float prob_threshold = 0.7f;
    std::int64_t min_kept = 0;  // 0: derived as batch_pixels / 16
    int ignore_index = kIgnoreLabel;

    std::int64_t effective_min_kept(std::int64_t batch_pixels) const;
};

// logits [N,K,H,W], labels [N,H,W] with values in [0,K) or 255 (ignored).
// Returns a scalar loss tensor; gradients flow into logits.
Tensor ohem_cross_entropy(const Tensor& logits, const LabelMap& labels, const OhemConfig& cfg);

}  // namespace liteseg
