#include "ref_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace liteseg::ref {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(std::string("ref: ") + msg);
}

}  // namespace

RefTensor from_tensor(const Tensor& t) {
    RefTensor r;
    r.shape = t.shape();
    r.data.assign(t.vec().begin(), t.vec().end());
    return r;
}

Tensor to_tensor(const RefTensor& t) {
    std::vector<float> values(t.data.begin(), t.data.end());
    return Tensor::from_vector(t.shape, std::move(values));
}

double max_abs_diff(const Tensor& a, const RefTensor& b) {
    require(shape_eq(a.shape(), b.shape), "max_abs_diff shape mismatch");
    double worst = 0.0;
    const float* ad = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(ad[i]) - b.data[static_cast<std::size_t>(i)]));
    }
    return worst;
}

RefTensor conv2d(const RefTensor& x, const RefTensor& w, const RefTensor& bias, int stride,
                 int padding) {
    require(x.shape.size() == 4 && w.shape.size() == 4, "conv2d expects 4-D tensors");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int oc = w.dim(0), kc = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    require(c == kc, "conv2d channel mismatch");
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (ww + 2 * padding - kw) / stride + 1;
    RefTensor out({n, oc, oh, ow});
    for (int ni = 0; ni < n; ++ni) {
        for (int o = 0; o < oc; ++o) {
            for (int y = 0; y < oh; ++y) {
                for (int xw = 0; xw < ow; ++xw) {
                    double acc = bias.data.empty() ? 0.0 : bias.data[static_cast<std::size_t>(o)];
                    for (int ci = 0; ci < c; ++ci) {
                        for (int ki = 0; ki < kh; ++ki) {
                            for (int kj = 0; kj < kw; ++kj) {
                                int iy = y * stride - padding + ki;
                                int ix = xw * stride - padding + kj;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= ww) continue;
                                double xv = x.data[((static_cast<std::size_t>(ni) * c + ci) * h + iy) * ww + ix];
                                double wv = w.data[((static_cast<std::size_t>(o) * c + ci) * kh + ki) * kw + kj];
                                acc += xv * wv;
                            }
                        }
                    }
                    out.data[((static_cast<std::size_t>(ni) * oc + o) * oh + y) * ow + xw] = acc;
                }
            }
        }
    }
    return out;
}

RefTensor batch_norm_train(const RefTensor& x, const RefTensor& gamma, const RefTensor& beta,
                           double eps) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const double m = static_cast<double>(n) * plane;
    RefTensor out(x.shape);
    for (int ci = 0; ci < c; ++ci) {
        double s = 0.0;
        for (int ni = 0; ni < n; ++ni) {
            const double* p = x.data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
            for (std::int64_t i = 0; i < plane; ++i) s += p[i];
        }
        const double mean = s / m;
        double v = 0.0;
        for (int ni = 0; ni < n; ++ni) {
            const double* p = x.data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
            for (std::int64_t i = 0; i < plane; ++i) v += (p[i] - mean) * (p[i] - mean);
        }
        const double invstd = 1.0 / std::sqrt(v / m + eps);
        for (int ni = 0; ni < n; ++ni) {
            const double* p = x.data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
            double* o = out.data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                o[i] = gamma.data[static_cast<std::size_t>(ci)] * (p[i] - mean) * invstd +
                       beta.data[static_cast<std::size_t>(ci)];
            }
        }
    }
    return out;
}

RefTensor batch_norm_eval(const RefTensor& x, const RefTensor& gamma, const RefTensor& beta,
                          const RefTensor& running_mean, const RefTensor& running_var, double eps) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    RefTensor out(x.shape);
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const double invstd = 1.0 / std::sqrt(running_var.data[static_cast<std::size_t>(ci)] + eps);
            const double* p = x.data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
            double* o = out.data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                o[i] = gamma.data[static_cast<std::size_t>(ci)] *
                           (p[i] - running_mean.data[static_cast<std::size_t>(ci)]) * invstd +
                       beta.data[static_cast<std::size_t>(ci)];
            }
        }
    }
    return out;
}

RefTensor relu(const RefTensor& x) {
    RefTensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = std::max(0.0, x.data[i]);
    return out;
}

RefTensor sigmoid(const RefTensor& x) {
    RefTensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
    return out;
}

RefTensor bilinear_upsample(const RefTensor& x, int out_h, int out_w) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    RefTensor out({n, c, out_h, out_w});
    const double sh = static_cast<double>(h) / out_h;
    const double sw = static_cast<double>(w) / out_w;
    for (int p = 0; p < n * c; ++p) {
        const double* xp = x.data.data() + static_cast<std::size_t>(p) * h * w;
        double* op = out.data.data() + static_cast<std::size_t>(p) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            double fy = std::max(0.0, (oy + 0.5) * sh - 0.5);
            int y0 = std::min(static_cast<int>(fy), h - 1);
            int y1 = std::min(y0 + 1, h - 1);
            double wy = fy - y0;
            for (int ox = 0; ox < out_w; ++ox) {
                double fx = std::max(0.0, (ox + 0.5) * sw - 0.5);
                int x0 = std::min(static_cast<int>(fx), w - 1);
                int x1 = std::min(x0 + 1, w - 1);
                double wx = fx - x0;
                double top = xp[static_cast<std::size_t>(y0) * w + x0] * (1.0 - wx) +
                             xp[static_cast<std::size_t>(y0) * w + x1] * wx;
                double bot = xp[static_cast<std::size_t>(y1) * w + x0] * (1.0 - wx) +
                             xp[static_cast<std::size_t>(y1) * w + x1] * wx;
                op[static_cast<std::size_t>(oy) * out_w + ox] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

RefTensor adaptive_avg_pool(const RefTensor& x, int bin_h, int bin_w) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    require(bin_h >= 1 && bin_h <= h && bin_w >= 1 && bin_w <= w, "adaptive pool bins");
    RefTensor out({n, c, bin_h, bin_w});
    for (int p = 0; p < n * c; ++p) {
        const double* xp = x.data.data() + static_cast<std::size_t>(p) * h * w;
        double* op = out.data.data() + static_cast<std::size_t>(p) * bin_h * bin_w;
        for (int by = 0; by < bin_h; ++by) {
            int y0 = (by * h) / bin_h;
            int y1 = ((by + 1) * h + bin_h - 1) / bin_h;
            for (int bx = 0; bx < bin_w; ++bx) {
                int x0 = (bx * w) / bin_w;
                int x1 = ((bx + 1) * w + bin_w - 1) / bin_w;
                double s = 0.0;
                for (int y = y0; y < y1; ++y) {
                    for (int xi = x0; xi < x1; ++xi) s += xp[static_cast<std::size_t>(y) * w + xi];
                }
                op[static_cast<std::size_t>(by) * bin_w + bx] = s / ((y1 - y0) * (x1 - x0));
            }
        }
    }
    return out;
}

std::pair<RefTensor, RefTensor> channel_mean_max(const RefTensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    RefTensor mean({n, 1, h, w}), mx({n, 1, h, w});
    for (int ni = 0; ni < n; ++ni) {
        for (std::int64_t i = 0; i < plane; ++i) {
            double s = 0.0;
            double best = x.data[(static_cast<std::size_t>(ni) * c) * plane + i];
            for (int ci = 0; ci < c; ++ci) {
                double v = x.data[(static_cast<std::size_t>(ni) * c + ci) * plane + i];
                s += v;
                best = std::max(best, v);
            }
            mean.data[static_cast<std::size_t>(ni) * plane + i] = s / c;
            mx.data[static_cast<std::size_t>(ni) * plane + i] = best;
        }
    }
    return {mean, mx};
}

std::pair<RefTensor, RefTensor> spatial_avg_max_pool(const RefTensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    RefTensor avg({n, c, 1, 1}), mx({n, c, 1, 1});
    for (int p = 0; p < n * c; ++p) {
        const double* xp = x.data.data() + static_cast<std::size_t>(p) * plane;
        double s = 0.0, best = xp[0];
        for (std::int64_t i = 0; i < plane; ++i) {
            s += xp[i];
            best = std::max(best, xp[i]);
        }
        avg.data[static_cast<std::size_t>(p)] = s / static_cast<double>(plane);
        mx.data[static_cast<std::size_t>(p)] = best;
    }
    return {avg, mx};
}

RefTensor concat(const std::vector<RefTensor>& parts, int axis) {
    require(!parts.empty(), "concat of zero tensors");
    Shape out_shape = parts.front().shape;
    out_shape[static_cast<std::size_t>(axis)] = 0;
    for (const RefTensor& p : parts) out_shape[static_cast<std::size_t>(axis)] += p.dim(axis);
    std::int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= parts.front().dim(a);
    for (int a = axis + 1; a < static_cast<int>(out_shape.size()); ++a) inner *= parts.front().dim(a);
    RefTensor out(out_shape);
    const std::int64_t out_axis = out_shape[static_cast<std::size_t>(axis)];
    std::int64_t offset = 0;
    for (const RefTensor& p : parts) {
        const std::int64_t extent = p.dim(axis);
        for (std::int64_t o = 0; o < outer; ++o) {
            std::copy(p.data.begin() + o * extent * inner, p.data.begin() + (o + 1) * extent * inner,
                      out.data.begin() + (o * out_axis + offset) * inner);
        }
        offset += extent;
    }
    return out;
}

namespace {

// Same broadcast cases as the production binary ops.
std::int64_t broadcast_index(const Shape& full, const Shape& small, std::int64_t i) {
    if (full == small) return i;
    if (shape_numel(small) == 1) return 0;
    const std::int64_t c = full[1];
    const std::int64_t plane = static_cast<std::int64_t>(full[2]) * full[3];
    if (small[1] == 1) {  // [N,1,H,W]
        return (i / (c * plane)) * plane + i % plane;
    }
    return i / plane;  // [N,C,1,1]
}

template <typename F>
RefTensor binary(const RefTensor& a, const RefTensor& b, F f) {
    const bool swapped = shape_numel(a.shape) < shape_numel(b.shape);
    const RefTensor& full = swapped ? b : a;
    const RefTensor& other = swapped ? a : b;
    RefTensor out(full.shape);
    for (std::int64_t i = 0; i < full.numel(); ++i) {
        std::int64_t j = broadcast_index(full.shape, other.shape, i);
        out.data[static_cast<std::size_t>(i)] =
            swapped ? f(other.data[static_cast<std::size_t>(j)], full.data[static_cast<std::size_t>(i)])
                    : f(full.data[static_cast<std::size_t>(i)], other.data[static_cast<std::size_t>(j)]);
    }
    return out;
}

}  // namespace

RefTensor add(const RefTensor& a, const RefTensor& b) {
    return binary(a, b, [](double x, double y) { return x + y; });
}

RefTensor mul(const RefTensor& a, const RefTensor& b) {
    return binary(a, b, [](double x, double y) { return x * y; });
}

RefTensor affine(const RefTensor& x, double k, double c) {
    RefTensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = k * x.data[i] + c;
    return out;
}

double sum(const RefTensor& x) {
    double s = 0.0;
    for (double v : x.data) s += v;
    return s;
}

double weighted_sum(const RefTensor& x, const RefTensor& weights) {
    require(x.data.size() == weights.data.size(), "weighted_sum length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) s += x.data[i] * weights.data[i];
    return s;
}

double ohem_cross_entropy(const RefTensor& logits, const LabelMap& labels, double prob_threshold,
                          std::int64_t min_kept) {
    const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    std::vector<double> losses;
    std::vector<double> probs;
    for (int ni = 0; ni < n; ++ni) {
        for (std::int64_t i = 0; i < plane; ++i) {
            std::uint8_t y = labels.values[static_cast<std::size_t>(ni * plane + i)];
            if (y == kIgnoreLabel) continue;
            const double* base = logits.data.data() + static_cast<std::size_t>(ni) * k * plane + i;
            double maxv = base[0];
            for (int c = 1; c < k; ++c) maxv = std::max(maxv, base[static_cast<std::size_t>(c) * plane]);
            double denom = 0.0;
            for (int c = 0; c < k; ++c) denom += std::exp(base[static_cast<std::size_t>(c) * plane] - maxv);
            double log_p = base[static_cast<std::size_t>(y) * plane] - maxv - std::log(denom);
            losses.push_back(-log_p);
            probs.push_back(std::exp(log_p));
        }
    }
    require(!losses.empty(), "ohem: all pixels ignored");
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (probs[i] < prob_threshold) kept.push_back(i);
    }
    const std::int64_t want = std::min<std::int64_t>(min_kept, static_cast<std::int64_t>(losses.size()));
    if (static_cast<std::int64_t>(kept.size()) < want) {
        std::vector<std::size_t> order(losses.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (losses[a] != losses[b]) return losses[a] > losses[b];
            return a < b;
        });
        kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(want));
    }
    double total = 0.0;
    for (std::size_t i : kept) total += losses[i];
    return total / static_cast<double>(kept.size());
}

LabelMap argmax_labels(const RefTensor& logits) {
    const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    LabelMap out(n, h, w);
    for (int ni = 0; ni < n; ++ni) {
        for (std::int64_t i = 0; i < plane; ++i) {
            const double* base = logits.data.data() + static_cast<std::size_t>(ni) * k * plane + i;
            double best = base[0];
            int best_k = 0;
            for (int c = 1; c < k; ++c) {
                double v = base[static_cast<std::size_t>(c) * plane];
                if (v > best) {
                    best = v;
                    best_k = c;
                }
            }
            out.values[static_cast<std::size_t>(ni * plane + i)] = static_cast<std::uint8_t>(best_k);
        }
    }
    return out;
}

}  // namespace liteseg::ref
