#pragma once

#include <array>
#include <random>

#include "liteseg/label_map.hpp"
#include "liteseg/tensor.hpp"

namespace liteseg {

// One image/label pair. Images are [3,H,W] float tensors; raw samples hold
// values in [0,1] until normalization.
struct Sample {
    Tensor image;
    LabelMap label;  // n == 1
};

struct AugmentConfig {
    std::array<float, 2> scale_range{1.0f, 1.0f};
    int crop_h = 64;
    int crop_w = 128;
    float hflip_prob = 0.5f;
    float jitter = 0.0f;  // brightness/contrast/saturation factors in 1 +- jitter
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    std::array<float, 3> std{0.229f, 0.224f, 0.225f};

    void validate() const;
};

// scale -> pad (image: channel mean, label: 255) -> random crop -> hflip ->
// color jitter -> normalize. Label geometry mirrors the image geometry
// exactly; jitter and normalization touch the image only.
Sample augment(const Sample& sample, const AugmentConfig& cfg, std::mt19937& rng);

// Normalization only (the eval-time path).
Sample normalize_sample(const Sample& sample, const AugmentConfig& cfg);

// Per-sample RNG stream derived from (seed, stream); independent of worker
// scheduling.
std::mt19937 derive_rng(std::uint64_t seed, std::uint64_t stream);

// Plain resize helpers shared by augmentation, evaluation, and benchmarking.
// Both directions are supported; images use align-corners-false bilinear,
// labels nearest neighbor.
Tensor resize_image_bilinear(const Tensor& image, int out_h, int out_w);
LabelMap resize_labels_nearest(const LabelMap& labels, int out_h, int out_w);

// Stacks samples into a batch: images [N,3,H,W], labels [N,H,W].
std::pair<Tensor, LabelMap> stack_samples(const std::vector<Sample>& samples);

}  // namespace liteseg
