#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "liteseg/loss.hpp"
#include "liteseg/seg_modules.hpp"
#include "ref_blocks.hpp"

namespace liteseg::check {

using ref::RefTensor;

namespace {

Tensor rand_tensor(const Shape& shape, Rng& rng, float lo = -2.0f, float hi = 2.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    Tensor t = Tensor::zeros(shape);
    for (float& v : t.vec()) v = dist(rng);
    return t;
}

std::vector<RefTensor> refify(const std::vector<Tensor>& inputs) {
    std::vector<RefTensor> out;
    out.reserve(inputs.size());
    for (const Tensor& t : inputs) out.push_back(ref::from_tensor(t));
    return out;
}

// Smallest gap between the top two values along the channel axis.
double channel_top2_gap(const RefTensor& x) {
    const int n = x.dim(0), c = x.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    double worst = 1e30;
    for (int ni = 0; ni < n; ++ni) {
        for (std::int64_t i = 0; i < plane; ++i) {
            double best = -1e30, second = -1e30;
            for (int ci = 0; ci < c; ++ci) {
                double v = x.data[(static_cast<std::size_t>(ni) * c + ci) * plane + i];
                if (v > best) {
                    second = best;
                    best = v;
                } else if (v > second) {
                    second = v;
                }
            }
            if (c > 1) worst = std::min(worst, best - second);
        }
    }
    return worst;
}

double spatial_top2_gap(const RefTensor& x) {
    const std::int64_t nc = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    double worst = 1e30;
    for (std::int64_t p = 0; p < nc; ++p) {
        double best = -1e30, second = -1e30;
        for (std::int64_t i = 0; i < plane; ++i) {
            double v = x.data[static_cast<std::size_t>(p * plane + i)];
            if (v > best) {
                second = best;
                best = v;
            } else if (v > second) {
                second = v;
            }
        }
        if (plane > 1) worst = std::min(worst, best - second);
    }
    return worst;
}

double min_abs(const RefTensor& x) {
    double worst = 1e30;
    for (double v : x.data) worst = std::min(worst, std::abs(v));
    return worst;
}

// Smallest per-channel batch variance (biased, over N,H,W). Training-mode BN
// on a nearly constant channel has huge curvature that breaks the
// finite-difference step.
double channel_batch_var_min(const RefTensor& x) {
    const int n = x.dim(0), c = x.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    const double m = static_cast<double>(n) * plane;
    double worst = 1e30;
    for (int ci = 0; ci < c; ++ci) {
        double s = 0.0, s2 = 0.0;
        for (int ni = 0; ni < n; ++ni) {
            const double* p = x.data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                s += p[i];
                s2 += p[i] * p[i];
            }
        }
        worst = std::min(worst, s2 / m - (s / m) * (s / m));
    }
    return worst;
}

constexpr double kKinkMargin = 8e-3;   // clearance for kinks fed by raw inputs
// After BN the typical per-element shift from one finite-difference step is
// ~1e-3 * invstd * gamma ~ 1e-3, so 6e-3 clears it several times over while
// keeping random draws likely to qualify.
constexpr double kDeepMargin = 6e-3;
constexpr double kVarFloor = 2e-2;

// Margin of a Conv-BN(-ReLU) stage: trips on near-zero pre-ReLU activations
// and near-constant channels going into training-mode BN.
bool cbr_smooth_at(const ref::RefCBR& cbr, const RefTensor& x, RefTensor* out) {
    RefTensor conv_out = cbr.conv.forward(x);
    if (cbr.bn.training && channel_batch_var_min(conv_out) < kVarFloor) return false;
    RefTensor pre = cbr.bn.forward(conv_out);
    bool ok = !cbr.with_relu || min_abs(pre) > kDeepMargin;
    if (out != nullptr) *out = cbr.with_relu ? ref::relu(pre) : pre;
    return ok;
}

}  // namespace

GradCheckResult run_gradcheck_case(const GradCheckCase& c, std::uint64_t seed, double tol,
                                   double step) {
    GradCheckResult result;
    result.name = c.name;

    std::vector<Tensor> inputs;
    std::vector<RefTensor> refs;
    bool drawn = false;
    for (int attempt = 0; attempt < 200; ++attempt) {
        Rng rng(seed + static_cast<std::uint64_t>(attempt) * 1000003ULL);
        inputs = c.make_inputs(rng);
        refs = refify(inputs);
        if (!c.precondition || c.precondition(refs)) {
            drawn = true;
            break;
        }
    }
    if (!drawn) {
        result.note = "no draw satisfied the precondition";
        return result;
    }

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (c.check_grad[i]) inputs[i].set_requires_grad(true);
    }
    Tensor loss = c.engine(inputs);
    if (loss.numel() != 1) {
        result.note = "engine did not produce a scalar";
        return result;
    }
    backward(loss);

    const double loss_ref = c.ref(refs);
    result.forward_diff = std::abs(static_cast<double>(loss.data()[0]) - loss_ref);
    if (result.forward_diff > 2e-3 * std::max(1.0, std::abs(loss_ref))) {
        result.note = "engine and reference forwards disagree";
        return result;
    }

    double max_rel = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!c.check_grad[i]) continue;
        const std::vector<float>& grad = inputs[i].grad();
        for (std::size_t j = 0; j < refs[i].data.size(); ++j) {
            const double saved = refs[i].data[j];
            refs[i].data[j] = saved + step;
            const double lp = c.ref(refs);
            refs[i].data[j] = saved - step;
            const double lm = c.ref(refs);
            refs[i].data[j] = saved;
            const double gn = (lp - lm) / (2.0 * step);
            const double ga = static_cast<double>(grad[j]);
            const double rel = std::abs(ga - gn) / std::max({1.0, std::abs(ga), std::abs(gn)});
            max_rel = std::max(max_rel, rel);
        }
    }
    result.max_rel_err = max_rel;
    result.pass = max_rel < tol;
    if (!result.pass) result.note = "max relative error " + std::to_string(max_rel);
    return result;
}

std::vector<GradCheckCase> op_gradcheck_cases() {
    std::vector<GradCheckCase> cases;

    auto weighted = [](const Tensor& out, const Tensor& w) { return sum(mul(out, w)); };
    auto ref_weighted = [](const RefTensor& out, const RefTensor& w) {
        return ref::weighted_sum(out, w);
    };

    cases.push_back({
        "op.relu",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 4, 5}, rng), rand_tensor({2, 3, 4, 5}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) { return weighted(relu(in[0]), in[1]); },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::relu(in[0]), in[1]);
        },
        [](const std::vector<RefTensor>& in) { return min_abs(in[0]) > kKinkMargin; },
    });

    cases.push_back({
        "op.sigmoid",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 4, 5}, rng), rand_tensor({2, 3, 4, 5}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) { return weighted(sigmoid(in[0]), in[1]); },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::sigmoid(in[0]), in[1]);
        },
        nullptr,
    });

    cases.push_back({
        "op.affine",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 2, 3, 3}, rng), rand_tensor({2, 2, 3, 3}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) { return weighted(affine(in[0], 1.7f, -0.3f), in[1]); },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::affine(in[0], 1.7, -0.3), in[1]);
        },
        nullptr,
    });

    cases.push_back({
        "op.sum",
        [](Rng& rng) { return std::vector<Tensor>{rand_tensor({2, 3, 4, 4}, rng)}; },
        {true},
        [](const std::vector<Tensor>& in) { return sum(in[0]); },
        [](const std::vector<RefTensor>& in) { return ref::sum(in[0]); },
        nullptr,
    });

    struct BinSpec {
        const char* name;
        Shape b_shape;
        bool is_mul;
    };
    for (const BinSpec& spec : {BinSpec{"op.add.same", {2, 3, 4, 4}, false},
                                BinSpec{"op.add.scalar", {1}, false},
                                BinSpec{"op.add.spatial", {2, 1, 4, 4}, false},
                                BinSpec{"op.add.channel", {2, 3, 1, 1}, false},
                                BinSpec{"op.mul.same", {2, 3, 4, 4}, true},
                                BinSpec{"op.mul.scalar", {1}, true},
                                BinSpec{"op.mul.spatial", {2, 1, 4, 4}, true},
                                BinSpec{"op.mul.channel", {2, 3, 1, 1}, true}}) {
        cases.push_back({
            spec.name,
            [spec](Rng& rng) {
                return std::vector<Tensor>{rand_tensor({2, 3, 4, 4}, rng),
                                           rand_tensor(spec.b_shape, rng),
                                           rand_tensor({2, 3, 4, 4}, rng)};
            },
            {true, true, false},
            [spec, weighted](const std::vector<Tensor>& in) {
                Tensor out = spec.is_mul ? mul(in[0], in[1]) : add(in[0], in[1]);
                return weighted(out, in[2]);
            },
            [spec, ref_weighted](const std::vector<RefTensor>& in) {
                RefTensor out = spec.is_mul ? ref::mul(in[0], in[1]) : ref::add(in[0], in[1]);
                return ref_weighted(out, in[2]);
            },
            nullptr,
        });
    }

    cases.push_back({
        "op.concat.channel",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 1, 3, 4}, rng), rand_tensor({2, 2, 3, 4}, rng),
                                       rand_tensor({2, 1, 3, 4}, rng), rand_tensor({2, 4, 3, 4}, rng)};
        },
        {true, true, true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(concat({in[0], in[1], in[2]}, 1), in[3]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::concat({in[0], in[1], in[2]}, 1), in[3]);
        },
        nullptr,
    });

    cases.push_back({
        "op.conv2d.s1p1",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 5, 6}, rng),
                                       rand_tensor({4, 3, 3, 3}, rng, -1.0f, 1.0f),
                                       rand_tensor({4}, rng, -0.5f, 0.5f),
                                       rand_tensor({2, 4, 5, 6}, rng)};
        },
        {true, true, true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(conv2d(in[0], in[1], in[2], 1, 1), in[3]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::conv2d(in[0], in[1], in[2], 1, 1), in[3]);
        },
        nullptr,
    });

    cases.push_back({
        "op.conv2d.s2p0",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({1, 2, 6, 6}, rng),
                                       rand_tensor({3, 2, 2, 2}, rng, -1.0f, 1.0f),
                                       rand_tensor({1, 3, 3, 3}, rng)};
        },
        {true, true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(conv2d(in[0], in[1], Tensor(), 2, 0), in[2]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::conv2d(in[0], in[1], RefTensor(), 2, 0), in[2]);
        },
        nullptr,
    });

    cases.push_back({
        "op.batch_norm.train",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 4, 4}, rng),
                                       rand_tensor({3}, rng, 0.5f, 1.5f),
                                       rand_tensor({3}, rng, -0.5f, 0.5f),
                                       rand_tensor({2, 3, 4, 4}, rng)};
        },
        {true, true, true, false},
        [weighted](const std::vector<Tensor>& in) {
            Tensor rm = Tensor::zeros({3});
            Tensor rv = Tensor::full({3}, 1.0f);
            return weighted(batch_norm(in[0], in[1], in[2], rm, rv, 1e-5f, 0.9f, true), in[3]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::batch_norm_train(in[0], in[1], in[2], 1e-5), in[3]);
        },
        nullptr,
    });

    cases.push_back({
        "op.batch_norm.eval",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 4, 4}, rng),
                                       rand_tensor({3}, rng, 0.5f, 1.5f),
                                       rand_tensor({3}, rng, -0.5f, 0.5f),
                                       rand_tensor({3}, rng, -0.3f, 0.3f),
                                       rand_tensor({3}, rng, 0.5f, 1.5f),
                                       rand_tensor({2, 3, 4, 4}, rng)};
        },
        {true, true, true, false, false, false},
        [weighted](const std::vector<Tensor>& in) {
            Tensor rm = Tensor::from_vector({3}, in[3].vec());
            Tensor rv = Tensor::from_vector({3}, in[4].vec());
            return weighted(batch_norm(in[0], in[1], in[2], rm, rv, 1e-5f, 0.9f, false), in[5]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::batch_norm_eval(in[0], in[1], in[2], in[3], in[4], 1e-5), in[5]);
        },
        nullptr,
    });

    cases.push_back({
        "op.bilinear_upsample",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 4, 5}, rng), rand_tensor({2, 3, 7, 9}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(bilinear_upsample(in[0], 7, 9), in[1]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::bilinear_upsample(in[0], 7, 9), in[1]);
        },
        nullptr,
    });

    cases.push_back({
        "op.adaptive_avg_pool",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 5, 6}, rng), rand_tensor({2, 3, 2, 2}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(adaptive_avg_pool(in[0], 2, 2), in[1]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::adaptive_avg_pool(in[0], 2, 2), in[1]);
        },
        nullptr,
    });

    cases.push_back({
        "op.channel_mean",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 4, 4, 5}, rng), rand_tensor({2, 1, 4, 5}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(channel_mean_max(in[0]).first, in[1]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::channel_mean_max(in[0]).first, in[1]);
        },
        nullptr,
    });

    cases.push_back({
        "op.channel_max",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 4, 4, 5}, rng), rand_tensor({2, 1, 4, 5}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(channel_mean_max(in[0]).second, in[1]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::channel_mean_max(in[0]).second, in[1]);
        },
        [](const std::vector<RefTensor>& in) { return channel_top2_gap(in[0]) > kKinkMargin; },
    });

    cases.push_back({
        "op.spatial_avg",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 5, 5}, rng), rand_tensor({2, 3, 1, 1}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(spatial_avg_max_pool(in[0]).first, in[1]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::spatial_avg_max_pool(in[0]).first, in[1]);
        },
        nullptr,
    });

    cases.push_back({
        "op.spatial_max",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 5, 5}, rng), rand_tensor({2, 3, 1, 1}, rng)};
        },
        {true, false},
        [weighted](const std::vector<Tensor>& in) {
            return weighted(spatial_avg_max_pool(in[0]).second, in[1]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            return ref_weighted(ref::spatial_avg_max_pool(in[0]).second, in[1]);
        },
        [](const std::vector<RefTensor>& in) { return spatial_top2_gap(in[0]) > kKinkMargin; },
    });

    // Labels for the loss checks: 2x4x4 grid over 4 classes with two ignored
    // pixels, fixed pattern.
    auto make_labels = []() {
        LabelMap labels(2, 4, 4);
        for (std::size_t i = 0; i < labels.values.size(); ++i) {
            labels.values[i] = static_cast<std::uint8_t>((i * 7 + 3) % 4);
        }
        labels.values[5] = kIgnoreLabel;
        labels.values[21] = kIgnoreLabel;
        return labels;
    };

    cases.push_back({
        "op.cross_entropy.plain",
        [](Rng& rng) { return std::vector<Tensor>{rand_tensor({2, 4, 4, 4}, rng)}; },
        {true},
        [make_labels](const std::vector<Tensor>& in) {
            OhemConfig cfg;
            cfg.prob_threshold = 1.0f;
            cfg.min_kept = 30;  // every valid pixel
            return ohem_cross_entropy(in[0], make_labels(), cfg);
        },
        [make_labels](const std::vector<RefTensor>& in) {
            return ref::ohem_cross_entropy(in[0], make_labels(), 1.0, 30);
        },
        nullptr,
    });

    cases.push_back({
        "op.cross_entropy.ohem",
        [](Rng& rng) { return std::vector<Tensor>{rand_tensor({2, 4, 4, 4}, rng, -3.0f, 3.0f)}; },
        {true},
        [make_labels](const std::vector<Tensor>& in) {
            OhemConfig cfg;
            cfg.prob_threshold = 0.7f;
            cfg.min_kept = 6;
            return ohem_cross_entropy(in[0], make_labels(), cfg);
        },
        [make_labels](const std::vector<RefTensor>& in) {
            return ref::ohem_cross_entropy(in[0], make_labels(), 0.7, 6);
        },
        [make_labels](const std::vector<RefTensor>& in) {
            // The kept set must be stable under the finite-difference step:
            // true-class probabilities clear of the threshold.
            const LabelMap labels = make_labels();
            const RefTensor& logits = in[0];
            const int k = logits.dim(1);
            const std::int64_t plane = static_cast<std::int64_t>(logits.dim(2)) * logits.dim(3);
            for (int ni = 0; ni < logits.dim(0); ++ni) {
                for (std::int64_t i = 0; i < plane; ++i) {
                    std::uint8_t y = labels.values[static_cast<std::size_t>(ni * plane + i)];
                    if (y == kIgnoreLabel) continue;
                    const double* base =
                        logits.data.data() + static_cast<std::size_t>(ni) * k * plane + i;
                    double maxv = base[0];
                    for (int c = 1; c < k; ++c) {
                        maxv = std::max(maxv, base[static_cast<std::size_t>(c) * plane]);
                    }
                    double denom = 0.0;
                    for (int c = 0; c < k; ++c) {
                        denom += std::exp(base[static_cast<std::size_t>(c) * plane] - maxv);
                    }
                    double p = std::exp(base[static_cast<std::size_t>(y) * plane] - maxv) / denom;
                    if (std::abs(p - 0.7) < 0.03) return false;
                }
            }
            return true;
        },
    });

    return cases;
}

std::vector<GradCheckCase> block_gradcheck_cases() {
    std::vector<GradCheckCase> cases;

    auto weighted = [](const Tensor& out, const Tensor& w) { return sum(mul(out, w)); };
    auto ref_weighted = [](const RefTensor& out, const RefTensor& w) {
        return ref::weighted_sum(out, w);
    };

    cases.push_back({
        "block.spatial_attention",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 5, 6}, rng),
                                       rand_tensor({2, 3, 5, 6}, rng),
                                       rand_tensor({1, 4, 3, 3}, rng, -1.0f, 1.0f),
                                       rand_tensor({1}, rng, -0.5f, 0.5f),
                                       rand_tensor({2, 1, 5, 6}, rng)};
        },
        {true, true, true, true, false},
        [weighted](const std::vector<Tensor>& in) {
            Conv2d conv{in[2], in[3], 1, 1};
            return weighted(spatial_attention(in[0], in[1], conv, true), in[4]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefConv conv{in[2], in[3], 1, 1};
            return ref_weighted(ref::spatial_attention(in[0], in[1], conv, true), in[4]);
        },
        [](const std::vector<RefTensor>& in) {
            return channel_top2_gap(in[0]) > kKinkMargin && channel_top2_gap(in[1]) > kKinkMargin;
        },
    });

    cases.push_back({
        "block.spatial_attention.nomax",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 5, 6}, rng),
                                       rand_tensor({2, 3, 5, 6}, rng),
                                       rand_tensor({1, 2, 3, 3}, rng, -1.0f, 1.0f),
                                       rand_tensor({1}, rng, -0.5f, 0.5f),
                                       rand_tensor({2, 1, 5, 6}, rng)};
        },
        {true, true, true, true, false},
        [weighted](const std::vector<Tensor>& in) {
            Conv2d conv{in[2], in[3], 1, 1};
            return weighted(spatial_attention(in[0], in[1], conv, false), in[4]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefConv conv{in[2], in[3], 1, 1};
            return ref_weighted(ref::spatial_attention(in[0], in[1], conv, false), in[4]);
        },
        nullptr,
    });

    cases.push_back({
        "block.channel_attention",
        [](Rng& rng) {
            return std::vector<Tensor>{rand_tensor({2, 3, 4, 4}, rng),
                                       rand_tensor({2, 3, 4, 4}, rng),
                                       rand_tensor({3, 12, 1, 1}, rng, -1.0f, 1.0f),
                                       rand_tensor({3}, rng, -0.5f, 0.5f),
                                       rand_tensor({2, 3, 1, 1}, rng)};
        },
        {true, true, true, true, false},
        [weighted](const std::vector<Tensor>& in) {
            Conv2d conv{in[2], in[3], 1, 0};
            return weighted(channel_attention(in[0], in[1], conv), in[4]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefConv conv{in[2], in[3], 1, 0};
            return ref_weighted(ref::channel_attention(in[0], in[1], conv), in[4]);
        },
        [](const std::vector<RefTensor>& in) {
            return spatial_top2_gap(in[0]) > kKinkMargin && spatial_top2_gap(in[1]) > kKinkMargin;
        },
    });

    // UAFM with spatial attention, projections on both sides, training-mode BN.
    // Inputs: f_high [1,4,3,4], f_low [1,5,6,8], then
    //   high_proj conv [3,4,1,1], gamma[3], beta[3]
    //   low_proj conv [3,5,1,1], gamma[3], beta[3]
    //   attention conv [1,4,3,3], bias [1], weights [1,3,6,8]
    auto build_uafm = [](const std::vector<Tensor>& in, AttentionKind kind, bool sum_fusion) {
        UafmBlock block;
        block.channels = 3;
        block.attention = kind;
        block.sum_fusion = sum_fusion;
        ConvBNReLU high;
        high.conv = Conv2d{in[2], Tensor(), 1, 0};
        high.bn = BatchNorm2d{in[3], in[4], Tensor::zeros({3}), Tensor::full({3}, 1.0f), 1e-5f, 0.9f};
        high.with_relu = true;
        block.high_proj = high;
        ConvBNReLU low;
        low.conv = Conv2d{in[5], Tensor(), 1, 0};
        low.bn = BatchNorm2d{in[6], in[7], Tensor::zeros({3}), Tensor::full({3}, 1.0f), 1e-5f, 0.9f};
        low.with_relu = false;
        block.low_proj = low;
        if (kind == AttentionKind::Spatial) block.attention_conv = Conv2d{in[8], in[9], 1, 1};
        if (kind == AttentionKind::Channel) block.attention_conv = Conv2d{in[8], in[9], 1, 0};
        return block;
    };
    auto build_ref_uafm = [](const std::vector<RefTensor>& in, AttentionKind kind,
                             bool sum_fusion) {
        ref::RefUafm block;
        block.channels = 3;
        block.attention = kind;
        block.sum_fusion = sum_fusion;
        ref::RefCBR high;
        high.conv = ref::RefConv{in[2], RefTensor(), 1, 0};
        high.bn = ref::RefBN{in[3], in[4], RefTensor({3}, 0.0), RefTensor({3}, 1.0), 1e-5, true};
        high.with_relu = true;
        block.high_proj = high;
        ref::RefCBR low;
        low.conv = ref::RefConv{in[5], RefTensor(), 1, 0};
        low.bn = ref::RefBN{in[6], in[7], RefTensor({3}, 0.0), RefTensor({3}, 1.0), 1e-5, true};
        low.with_relu = false;
        block.low_proj = low;
        if (kind == AttentionKind::Spatial) block.attention_conv = ref::RefConv{in[8], in[9], 1, 1};
        if (kind == AttentionKind::Channel) block.attention_conv = ref::RefConv{in[8], in[9], 1, 0};
        return block;
    };
    auto uafm_inputs = [](Rng& rng, AttentionKind kind) {
        std::vector<Tensor> in{
            rand_tensor({1, 4, 3, 4}, rng),          rand_tensor({1, 4, 6, 8}, rng),
            rand_tensor({3, 4, 1, 1}, rng, -1, 1),   rand_tensor({3}, rng, 0.5f, 1.5f),
            rand_tensor({3}, rng, -0.5f, 0.5f),      rand_tensor({3, 4, 1, 1}, rng, -1, 1),
            rand_tensor({3}, rng, 0.5f, 1.5f),       rand_tensor({3}, rng, -0.5f, 0.5f),
        };
        if (kind == AttentionKind::Spatial) {
            in.push_back(rand_tensor({1, 4, 3, 3}, rng, -1, 1));
            in.push_back(rand_tensor({1}, rng, -0.5f, 0.5f));
        } else if (kind == AttentionKind::Channel) {
            in.push_back(rand_tensor({3, 12, 1, 1}, rng, -1, 1));
            in.push_back(rand_tensor({3}, rng, -0.5f, 0.5f));
        }
        in.push_back(rand_tensor({1, 3, 6, 8}, rng));  // loss weights
        return in;
    };

    // Rejects draws with a ReLU kink or attention-max tie too close to the
    // finite-difference step anywhere along the UAFM path.
    auto uafm_smooth = [build_ref_uafm](const std::vector<RefTensor>& in, AttentionKind kind,
                                        bool sum_fusion) {
        ref::RefUafm block = build_ref_uafm(in, kind, sum_fusion);
        RefTensor high, low;
        if (!cbr_smooth_at(*block.high_proj, in[0], &high)) return false;
        if (!cbr_smooth_at(*block.low_proj, in[1], &low)) return false;
        if (sum_fusion) return true;
        RefTensor f_up = ref::bilinear_upsample(high, low.dim(2), low.dim(3));
        if (kind == AttentionKind::Spatial || kind == AttentionKind::SpatialNoMax) {
            return channel_top2_gap(f_up) > kDeepMargin && channel_top2_gap(low) > kDeepMargin;
        }
        if (kind == AttentionKind::Channel) {
            return spatial_top2_gap(f_up) > kDeepMargin && spatial_top2_gap(low) > kDeepMargin;
        }
        return true;
    };

    cases.push_back({
        "block.uafm.spatial",
        [uafm_inputs](Rng& rng) { return uafm_inputs(rng, AttentionKind::Spatial); },
        {true, true, true, true, true, true, true, true, true, true, false},
        [build_uafm, weighted](const std::vector<Tensor>& in) {
            UafmBlock block = build_uafm(in, AttentionKind::Spatial, false);
            return weighted(block.forward(in[0], in[1], true), in.back());
        },
        [build_ref_uafm, ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefUafm block = build_ref_uafm(in, AttentionKind::Spatial, false);
            return ref_weighted(block.forward(in[0], in[1]), in.back());
        },
        [uafm_smooth](const std::vector<RefTensor>& in) {
            return uafm_smooth(in, AttentionKind::Spatial, false);
        },
    });

    cases.push_back({
        "block.uafm.channel",
        [uafm_inputs](Rng& rng) { return uafm_inputs(rng, AttentionKind::Channel); },
        {true, true, true, true, true, true, true, true, true, true, false},
        [build_uafm, weighted](const std::vector<Tensor>& in) {
            UafmBlock block = build_uafm(in, AttentionKind::Channel, false);
            return weighted(block.forward(in[0], in[1], true), in.back());
        },
        [build_ref_uafm, ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefUafm block = build_ref_uafm(in, AttentionKind::Channel, false);
            return ref_weighted(block.forward(in[0], in[1]), in.back());
        },
        [uafm_smooth](const std::vector<RefTensor>& in) {
            return uafm_smooth(in, AttentionKind::Channel, false);
        },
    });

    cases.push_back({
        "block.uafm.none",
        [uafm_inputs](Rng& rng) { return uafm_inputs(rng, AttentionKind::None); },
        {true, true, true, true, true, true, true, true, false},
        [build_uafm, weighted](const std::vector<Tensor>& in) {
            UafmBlock block = build_uafm(in, AttentionKind::None, false);
            return weighted(block.forward(in[0], in[1], true), in.back());
        },
        [build_ref_uafm, ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefUafm block = build_ref_uafm(in, AttentionKind::None, false);
            return ref_weighted(block.forward(in[0], in[1]), in.back());
        },
        [uafm_smooth](const std::vector<RefTensor>& in) {
            return uafm_smooth(in, AttentionKind::None, false);
        },
    });

    cases.push_back({
        "block.uafm.sum",
        [uafm_inputs](Rng& rng) { return uafm_inputs(rng, AttentionKind::None); },
        {true, true, true, true, true, true, true, true, false},
        [build_uafm, weighted](const std::vector<Tensor>& in) {
            UafmBlock block = build_uafm(in, AttentionKind::None, true);
            return weighted(block.forward(in[0], in[1], true), in.back());
        },
        [build_ref_uafm, ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefUafm block = build_ref_uafm(in, AttentionKind::None, true);
            return ref_weighted(block.forward(in[0], in[1]), in.back());
        },
        [uafm_smooth](const std::vector<RefTensor>& in) {
            return uafm_smooth(in, AttentionKind::None, true);
        },
    });

    // SPPM inputs: x [2,6,6,8], three branch convs [2,6,1,1]+bn, fuse [3,2,3,3]+bn.
    auto sppm_inputs = [](Rng& rng, const Shape& x_shape) {
        std::vector<Tensor> in{rand_tensor(x_shape, rng)};
        for (int b = 0; b < 3; ++b) {
            in.push_back(rand_tensor({2, 4, 1, 1}, rng, -1, 1));
            in.push_back(rand_tensor({2}, rng, 0.5f, 1.5f));
            in.push_back(rand_tensor({2}, rng, -0.5f, 0.5f));
        }
        in.push_back(rand_tensor({3, 2, 3, 3}, rng, -1, 1));
        in.push_back(rand_tensor({3}, rng, 0.5f, 1.5f));
        in.push_back(rand_tensor({3}, rng, -0.5f, 0.5f));
        in.push_back(rand_tensor({x_shape[0], 3, x_shape[2], x_shape[3]}, rng));
        return in;
    };
    auto build_sppm = [](const std::vector<Tensor>& in) {
        SppmBlock block;
        block.inter_channels = 2;
        block.out_channels = 3;
        for (int b = 0; b < 3; ++b) {
            ConvBNReLU branch;
            branch.conv = Conv2d{in[static_cast<std::size_t>(1 + 3 * b)], Tensor(), 1, 0};
            branch.bn = BatchNorm2d{in[static_cast<std::size_t>(2 + 3 * b)],
                                    in[static_cast<std::size_t>(3 + 3 * b)], Tensor::zeros({2}),
                                    Tensor::full({2}, 1.0f), 1e-5f, 0.9f};
            block.branch_convs[static_cast<std::size_t>(b)] = branch;
        }
        ConvBNReLU fuse;
        fuse.conv = Conv2d{in[10], Tensor(), 1, 1};
        fuse.bn = BatchNorm2d{in[11], in[12], Tensor::zeros({3}), Tensor::full({3}, 1.0f), 1e-5f, 0.9f};
        block.fuse_conv = fuse;
        return block;
    };
    auto build_ref_sppm = [](const std::vector<RefTensor>& in) {
        ref::RefSppm block;
        for (int b = 0; b < 3; ++b) {
            ref::RefCBR branch;
            branch.conv = ref::RefConv{in[static_cast<std::size_t>(1 + 3 * b)], RefTensor(), 1, 0};
            branch.bn = ref::RefBN{in[static_cast<std::size_t>(2 + 3 * b)],
                                   in[static_cast<std::size_t>(3 + 3 * b)], RefTensor({2}, 0.0),
                                   RefTensor({2}, 1.0), 1e-5, true};
            block.branches[static_cast<std::size_t>(b)] = branch;
        }
        ref::RefCBR fuse;
        fuse.conv = ref::RefConv{in[10], RefTensor(), 1, 1};
        fuse.bn = ref::RefBN{in[11], in[12], RefTensor({3}, 0.0), RefTensor({3}, 1.0), 1e-5, true};
        block.fuse = fuse;
        return block;
    };
    std::vector<bool> sppm_checks(14, true);
    sppm_checks[13] = false;

    auto sppm_smooth = [build_ref_sppm](const std::vector<RefTensor>& in) {
        ref::RefSppm block = build_ref_sppm(in);
        const int h = in[0].dim(2), w = in[0].dim(3);
        RefTensor acc;
        for (std::size_t i = 0; i < block.bins.size(); ++i) {
            RefTensor pooled = ref::adaptive_avg_pool(in[0], std::min(block.bins[i], h),
                                                      std::min(block.bins[i], w));
            RefTensor branch_out;
            if (!cbr_smooth_at(block.branches[i], pooled, &branch_out)) return false;
            RefTensor up = ref::bilinear_upsample(branch_out, h, w);
            acc = acc.data.empty() ? up : ref::add(acc, up);
        }
        return cbr_smooth_at(block.fuse, acc, nullptr);
    };

    cases.push_back({
        "block.sppm",
        [sppm_inputs](Rng& rng) { return sppm_inputs(rng, {2, 4, 6, 8}); },
        sppm_checks,
        [build_sppm, weighted](const std::vector<Tensor>& in) {
            SppmBlock block = build_sppm(in);
            return weighted(block.forward(in[0], true), in.back());
        },
        [build_ref_sppm, ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefSppm block = build_ref_sppm(in);
            return ref_weighted(block.forward(in[0]), in.back());
        },
        sppm_smooth,
    });

    cases.push_back({
        "block.sppm.small_input",
        [sppm_inputs](Rng& rng) { return sppm_inputs(rng, {2, 4, 2, 4}); },
        sppm_checks,
        [build_sppm, weighted](const std::vector<Tensor>& in) {
            SppmBlock block = build_sppm(in);
            return weighted(block.forward(in[0], true), in.back());
        },
        [build_ref_sppm, ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefSppm block = build_ref_sppm(in);
            return ref_weighted(block.forward(in[0]), in.back());
        },
        sppm_smooth,
    });

    cases.push_back({
        "block.seg_head",
        [](Rng& rng) {
            return std::vector<Tensor>{
                rand_tensor({1, 3, 4, 4}, rng),         rand_tensor({3, 3, 3, 3}, rng, -1, 1),
                rand_tensor({3}, rng, 0.5f, 1.5f),      rand_tensor({3}, rng, -0.5f, 0.5f),
                rand_tensor({4, 3, 1, 1}, rng, -1, 1),  rand_tensor({4}, rng, -0.5f, 0.5f),
                rand_tensor({1, 4, 8, 8}, rng)};
        },
        {true, true, true, true, true, true, false},
        [weighted](const std::vector<Tensor>& in) {
            SegHead head;
            ConvBNReLU mid;
            mid.conv = Conv2d{in[1], Tensor(), 1, 1};
            mid.bn = BatchNorm2d{in[2], in[3], Tensor::zeros({3}), Tensor::full({3}, 1.0f), 1e-5f, 0.9f};
            head.mid_conv = mid;
            head.classifier = Conv2d{in[4], in[5], 1, 0};
            return weighted(head.forward(in[0], 8, 8, true), in[6]);
        },
        [ref_weighted](const std::vector<RefTensor>& in) {
            ref::RefSegHead head;
            ref::RefCBR mid;
            mid.conv = ref::RefConv{in[1], RefTensor(), 1, 1};
            mid.bn = ref::RefBN{in[2], in[3], RefTensor({3}, 0.0), RefTensor({3}, 1.0), 1e-5, true};
            head.mid = mid;
            head.classifier = ref::RefConv{in[4], in[5], 1, 0};
            return ref_weighted(head.forward(in[0], 8, 8), in[6]);
        },
        [](const std::vector<RefTensor>& in) {
            ref::RefCBR mid;
            mid.conv = ref::RefConv{in[1], RefTensor(), 1, 1};
            mid.bn = ref::RefBN{in[2], in[3], RefTensor({3}, 0.0), RefTensor({3}, 1.0), 1e-5, true};
            return cbr_smooth_at(mid, in[0], nullptr);
        },
    });

    return cases;
}

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, bool verbose) {
    std::vector<GradCheckResult> results;
    auto run_all = [&](const std::vector<GradCheckCase>& cases) {
        for (const GradCheckCase& c : cases) {
            GradCheckResult r = run_gradcheck_case(c, seed);
            if (verbose) {
                std::printf("%-32s %s  max_rel=%.3e fwd_diff=%.3e%s%s\n", r.name.c_str(),
                            r.pass ? "PASS" : "FAIL", r.max_rel_err, r.forward_diff,
                            r.note.empty() ? "" : "  ", r.note.c_str());
            }
            results.push_back(std::move(r));
        }
    };
    run_all(op_gradcheck_cases());
    run_all(block_gradcheck_cases());
    return results;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
    for (const GradCheckResult& r : results) {
        if (!r.pass) return false;
    }
    return !results.empty();
}

}  // namespace liteseg::check
