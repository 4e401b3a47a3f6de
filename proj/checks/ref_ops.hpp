#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "liteseg/label_map.hpp"
#include "liteseg/tensor.hpp"

namespace liteseg::ref {

// Double-precision naive-loop reference kernels. These are intentionally
// independent of the production implementations (no im2col, no GEMM, no
// tape): plain loops evaluating the textbook definitions. They serve as
// forward-equivalence oracles and as the function under central finite
// differences in the gradient checks.
struct RefTensor {
    Shape shape;
    std::vector<double> data;

    RefTensor() = default;
    RefTensor(Shape s, double fill = 0.0)
        : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), fill) {}

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
};

RefTensor from_tensor(const Tensor& t);
Tensor to_tensor(const RefTensor& t);
double max_abs_diff(const Tensor& a, const RefTensor& b);

RefTensor conv2d(const RefTensor& x, const RefTensor& w, const RefTensor& bias, int stride,
                 int padding);
// Training mode normalizes by batch statistics; no running-stat side effects.
RefTensor batch_norm_train(const RefTensor& x, const RefTensor& gamma, const RefTensor& beta,
                           double eps);
RefTensor batch_norm_eval(const RefTensor& x, const RefTensor& gamma, const RefTensor& beta,
                          const RefTensor& running_mean, const RefTensor& running_var, double eps);
RefTensor relu(const RefTensor& x);
RefTensor sigmoid(const RefTensor& x);
RefTensor bilinear_upsample(const RefTensor& x, int out_h, int out_w);
RefTensor adaptive_avg_pool(const RefTensor& x, int bin_h, int bin_w);
std::pair<RefTensor, RefTensor> channel_mean_max(const RefTensor& x);
std::pair<RefTensor, RefTensor> spatial_avg_max_pool(const RefTensor& x);
RefTensor concat(const std::vector<RefTensor>& parts, int axis);
RefTensor add(const RefTensor& a, const RefTensor& b);
RefTensor mul(const RefTensor& a, const RefTensor& b);
RefTensor affine(const RefTensor& x, double k, double c);
double sum(const RefTensor& x);
// sum(x * weights), the scalarization used by the gradient checks.
double weighted_sum(const RefTensor& x, const RefTensor& weights);

// Mirrors the production mining rule: keep true-class prob < threshold, top
// up to min_kept hardest, mean over kept.
double ohem_cross_entropy(const RefTensor& logits, const LabelMap& labels, double prob_threshold,
                          std::int64_t min_kept);

LabelMap argmax_labels(const RefTensor& logits);

}  // namespace liteseg::ref
