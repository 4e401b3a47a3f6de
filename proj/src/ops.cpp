#include "liteseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "liteseg/parallel.hpp"

namespace liteseg {

namespace {

constexpr std::int64_t kChunk = 16384;

void parallel_chunks(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    std::int64_t items = (n + kChunk - 1) / kChunk;
    if (items <= 1) {
        fn(0, n);
        return;
    }
    parallel_for(items, [&](std::int64_t item) {
        std::int64_t begin = item * kChunk;
        fn(begin, std::min(n, begin + kChunk));
    });
}

struct Dims4 {
    int n, c, h, w;
};

Dims4 dims4(const Tensor& x, const char* what) {
    if (!x.defined() || x.ndim() != 4) {
        throw ShapeError(std::string(what) + " expects a 4-D tensor, got " +
                         (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
    }
    return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
    if (!grad_enabled()) return false;
    for (const Tensor* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

}  // namespace

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::make_node(x.shape(), {x}, [x](detail::Node& self) {
        if (!x.requires_grad()) return;
        const float* xd = x.data();
        const float* go = self.grad.data();
        auto& gx = Tensor(x).grad_vec();
        for (std::int64_t i = 0; i < self.numel(); ++i) {
            if (xd[i] > 0.0f) gx[static_cast<std::size_t>(i)] += go[i];
        }
    });
    const float* xd = x.data();
    float* od = out.data();
    std::int64_t n = x.numel();
    parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) od[i] = xd[i] > 0.0f ? xd[i] : 0.0f;
    });
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = Tensor::make_node(x.shape(), {x}, [x](detail::Node& self) {
        if (!x.requires_grad()) return;
        const float* y = self.data.data();
        const float* go = self.grad.data();
        auto& gx = Tensor(x).grad_vec();
        for (std::int64_t i = 0; i < self.numel(); ++i) {
            gx[static_cast<std::size_t>(i)] += go[i] * y[i] * (1.0f - y[i]);
        }
    });
    const float lo = std::numeric_limits<float>::min();
    const float hi = std::nextafter(1.0f, 0.0f);
    const float* xd = x.data();
    float* od = out.data();
    parallel_chunks(x.numel(), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            float v = xd[i];
            float y;
            if (v >= 0.0f) {
                y = 1.0f / (1.0f + std::exp(-v));
            } else {
                float ev = std::exp(v);
                y = ev / (1.0f + ev);
            }
            od[i] = std::min(hi, std::max(lo, y));
        }
    });
    return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, float eps, float momentum, bool training) {
    Dims4 d = dims4(x, "batch_norm");
    if (gamma.numel() != d.c || beta.numel() != d.c || running_mean.numel() != d.c ||
        running_var.numel() != d.c) {
        throw ShapeError("batch_norm parameter length does not match " + std::to_string(d.c) +
                         " channels (input " + shape_str(x.shape()) + ")");
    }
    if (eps <= 0.0f) throw ConfigError("batch_norm eps must be positive");
    const std::int64_t plane = static_cast<std::int64_t>(d.h) * d.w;
    const std::int64_t per_channel = static_cast<std::int64_t>(d.n) * plane;
    if (training && per_channel == 0) {
        throw ShapeError("batch_norm in training mode requires a non-empty batch");
    }

    std::vector<float> mean(static_cast<std::size_t>(d.c));
    std::vector<float> invstd(static_cast<std::size_t>(d.c));
    const float* xd = x.data();

    if (training) {
        for (int c = 0; c < d.c; ++c) {
            double s = 0.0, s2 = 0.0;
            for (int n = 0; n < d.n; ++n) {
                const float* p = xd + (static_cast<std::int64_t>(n) * d.c + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    s += p[i];
                    s2 += static_cast<double>(p[i]) * p[i];
                }
            }
            double m = s / static_cast<double>(per_channel);
            double var = s2 / static_cast<double>(per_channel) - m * m;
            var = std::max(var, 0.0);
            mean[static_cast<std::size_t>(c)] = static_cast<float>(m);
            invstd[static_cast<std::size_t>(c)] =
                static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            double unbiased = per_channel > 1
                                  ? var * static_cast<double>(per_channel) / (per_channel - 1)
                                  : var;
            float& rm = running_mean.data()[c];
            float& rv = running_var.data()[c];
            rm = momentum * rm + (1.0f - momentum) * static_cast<float>(m);
            rv = momentum * rv + (1.0f - momentum) * static_cast<float>(unbiased);
        }
    } else {
        for (int c = 0; c < d.c; ++c) {
            float rv = running_var.data()[c];
            if (rv < 0.0f) throw NumericError("negative running variance in batch_norm");
            mean[static_cast<std::size_t>(c)] = running_mean.data()[c];
            invstd[static_cast<std::size_t>(c)] = 1.0f / std::sqrt(rv + eps);
        }
    }

    Tensor out = Tensor::make_node(
        x.shape(), {x, gamma, beta},
        [x, gamma, beta, mean, invstd, d, plane, per_channel, training](detail::Node& self) {
            const float* go = self.grad.data();
            const float* xd = x.data();
            const float* g = gamma.data();
            // Per-channel reduction terms, fixed order over n then pixels.
            std::vector<double> sum_go(static_cast<std::size_t>(d.c), 0.0);
            std::vector<double> sum_go_xhat(static_cast<std::size_t>(d.c), 0.0);
            for (int c = 0; c < d.c; ++c) {
                double sg = 0.0, sgx = 0.0;
                for (int n = 0; n < d.n; ++n) {
                    std::int64_t base = (static_cast<std::int64_t>(n) * d.c + c) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) {
                        float xhat = (xd[base + i] - mean[static_cast<std::size_t>(c)]) *
                                     invstd[static_cast<std::size_t>(c)];
                        sg += go[base + i];
                        sgx += static_cast<double>(go[base + i]) * xhat;
                    }
                }
                sum_go[static_cast<std::size_t>(c)] = sg;
                sum_go_xhat[static_cast<std::size_t>(c)] = sgx;
            }
            if (gamma.requires_grad()) {
                auto& gg = Tensor(gamma).grad_vec();
                for (int c = 0; c < d.c; ++c) {
                    gg[static_cast<std::size_t>(c)] +=
                        static_cast<float>(sum_go_xhat[static_cast<std::size_t>(c)]);
                }
            }
            if (beta.requires_grad()) {
                auto& gb = Tensor(beta).grad_vec();
                for (int c = 0; c < d.c; ++c) {
                    gb[static_cast<std::size_t>(c)] +=
                        static_cast<float>(sum_go[static_cast<std::size_t>(c)]);
                }
            }
            if (!x.requires_grad()) return;
            auto& gx = Tensor(x).grad_vec();
            const double m = static_cast<double>(per_channel);
            for (int c = 0; c < d.c; ++c) {
                const float mu = mean[static_cast<std::size_t>(c)];
                const float is = invstd[static_cast<std::size_t>(c)];
                const float gc = g[c];
                const double mean_go = sum_go[static_cast<std::size_t>(c)] / m;
                const double mean_go_xhat = sum_go_xhat[static_cast<std::size_t>(c)] / m;
                for (int n = 0; n < d.n; ++n) {
                    std::int64_t base = (static_cast<std::int64_t>(n) * d.c + c) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) {
                        if (training) {
                            float xhat = (xd[base + i] - mu) * is;
                            double dxhat = static_cast<double>(go[base + i]) - mean_go -
                                           static_cast<double>(xhat) * mean_go_xhat;
                            gx[static_cast<std::size_t>(base + i)] +=
                                static_cast<float>(dxhat * gc * is);
                        } else {
                            gx[static_cast<std::size_t>(base + i)] += go[base + i] * gc * is;
                        }
                    }
                }
            }
        });

    float* od = out.data();
    const float* g = gamma.data();
    const float* b = beta.data();
    parallel_for(static_cast<std::int64_t>(d.n) * d.c, [&](std::int64_t item) {
        int c = static_cast<int>(item % d.c);
        std::int64_t base = item * plane;
        const float mu = mean[static_cast<std::size_t>(c)];
        const float is = invstd[static_cast<std::size_t>(c)];
        const float scale = g[c] * is;
        const float shift = b[c] - mu * scale;
        for (std::int64_t i = 0; i < plane; ++i) od[base + i] = xd[base + i] * scale + shift;
    });
    return out;
}

Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w) {
    Dims4 d = dims4(x, "bilinear_upsample");
    if (out_h <= 0 || out_w <= 0) {
        throw ShapeError("bilinear_upsample target size must be positive, got " +
                         std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    if (out_h < d.h || out_w < d.w) {
        throw ShapeError("bilinear_upsample cannot shrink " + shape_str(x.shape()) + " to " +
                         std::to_string(out_h) + "x" + std::to_string(out_w));
    }

    // Per-axis source indices and lerp weights, align-corners-false:
    // src = (dst + 0.5) * in/out - 0.5, clamped to the border.
    struct AxisTap {
        int i0, i1;
        float w1;  // weight of i1; i0 gets 1 - w1
    };
    auto make_taps = [](int in, int out) {
        std::vector<AxisTap> taps(static_cast<std::size_t>(out));
        const double scale = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            double src = (o + 0.5) * scale - 0.5;
            if (src < 0.0) src = 0.0;
            int i0 = static_cast<int>(src);
            if (i0 > in - 1) i0 = in - 1;
            int i1 = std::min(i0 + 1, in - 1);
            taps[static_cast<std::size_t>(o)] = {i0, i1, static_cast<float>(src - i0)};
        }
        return taps;
    };
    auto h_taps = make_taps(d.h, out_h);
    auto w_taps = make_taps(d.w, out_w);

    Tensor out = Tensor::make_node(
        {d.n, d.c, out_h, out_w}, {x}, [x, h_taps, w_taps, d, out_h, out_w](detail::Node& self) {
            if (!x.requires_grad()) return;
            auto& gx = Tensor(x).grad_vec();
            const float* go = self.grad.data();
            const std::int64_t planes = static_cast<std::int64_t>(d.n) * d.c;
            const std::int64_t in_plane = static_cast<std::int64_t>(d.h) * d.w;
            const std::int64_t out_plane = static_cast<std::int64_t>(out_h) * out_w;
            parallel_for(planes, [&](std::int64_t p) {
                float* gxp = gx.data() + p * in_plane;
                const float* gop = go + p * out_plane;
                for (int oh = 0; oh < out_h; ++oh) {
                    const AxisTap& th = h_taps[static_cast<std::size_t>(oh)];
                    for (int ow = 0; ow < out_w; ++ow) {
                        const AxisTap& tw = w_taps[static_cast<std::size_t>(ow)];
                        float g = gop[static_cast<std::int64_t>(oh) * out_w + ow];
                        gxp[static_cast<std::int64_t>(th.i0) * d.w + tw.i0] +=
                            g * (1.0f - th.w1) * (1.0f - tw.w1);
                        gxp[static_cast<std::int64_t>(th.i0) * d.w + tw.i1] +=
                            g * (1.0f - th.w1) * tw.w1;
                        gxp[static_cast<std::int64_t>(th.i1) * d.w + tw.i0] +=
                            g * th.w1 * (1.0f - tw.w1);
                        gxp[static_cast<std::int64_t>(th.i1) * d.w + tw.i1] += g * th.w1 * tw.w1;
                    }
                }
            });
        });

    const float* xd = x.data();
    float* od = out.data();
    const std::int64_t planes = static_cast<std::int64_t>(d.n) * d.c;
    const std::int64_t in_plane = static_cast<std::int64_t>(d.h) * d.w;
    const std::int64_t out_plane = static_cast<std::int64_t>(out_h) * out_w;
    parallel_for(planes, [&](std::int64_t p) {
        const float* xp = xd + p * in_plane;
        float* op = od + p * out_plane;
        for (int oh = 0; oh < out_h; ++oh) {
            const AxisTap& th = h_taps[static_cast<std::size_t>(oh)];
            const float* row0 = xp + static_cast<std::int64_t>(th.i0) * d.w;
            const float* row1 = xp + static_cast<std::int64_t>(th.i1) * d.w;
            for (int ow = 0; ow < out_w; ++ow) {
                const AxisTap& tw = w_taps[static_cast<std::size_t>(ow)];
                float top = row0[tw.i0] * (1.0f - tw.w1) + row0[tw.i1] * tw.w1;
                float bot = row1[tw.i0] * (1.0f - tw.w1) + row1[tw.i1] * tw.w1;
                op[static_cast<std::int64_t>(oh) * out_w + ow] =
                    top * (1.0f - th.w1) + bot * th.w1;
            }
        }
    });
    return out;
}

namespace {

// floor/ceil partition: region i covers [floor(i*in/bins), ceil((i+1)*in/bins)).
inline int region_start(int i, int in, int bins) {
    return static_cast<int>((static_cast<std::int64_t>(i) * in) / bins);
}
inline int region_end(int i, int in, int bins) {
    return static_cast<int>((static_cast<std::int64_t>(i + 1) * in + bins - 1) / bins);
}

}  // namespace

Tensor adaptive_avg_pool(const Tensor& x, int bin_h, int bin_w) {
    Dims4 d = dims4(x, "adaptive_avg_pool");
    if (bin_h < 1 || bin_w < 1) throw ShapeError("adaptive_avg_pool bins must be >= 1");
    if (bin_h > d.h || bin_w > d.w) {
        throw ShapeError("adaptive_avg_pool bins " + std::to_string(bin_h) + "x" +
                         std::to_string(bin_w) + " exceed input " + shape_str(x.shape()));
    }

    Tensor out = Tensor::make_node(
        {d.n, d.c, bin_h, bin_w}, {x}, [x, d, bin_h, bin_w](detail::Node& self) {
            if (!x.requires_grad()) return;
            auto& gx = Tensor(x).grad_vec();
            const float* go = self.grad.data();
            const std::int64_t planes = static_cast<std::int64_t>(d.n) * d.c;
            const std::int64_t in_plane = static_cast<std::int64_t>(d.h) * d.w;
            const std::int64_t out_plane = static_cast<std::int64_t>(bin_h) * bin_w;
            parallel_for(planes, [&](std::int64_t p) {
                float* gxp = gx.data() + p * in_plane;
                const float* gop = go + p * out_plane;
                for (int bh = 0; bh < bin_h; ++bh) {
                    int h0 = region_start(bh, d.h, bin_h), h1 = region_end(bh, d.h, bin_h);
                    for (int bw = 0; bw < bin_w; ++bw) {
                        int w0 = region_start(bw, d.w, bin_w), w1 = region_end(bw, d.w, bin_w);
                        float g = gop[static_cast<std::int64_t>(bh) * bin_w + bw] /
                                  static_cast<float>((h1 - h0) * (w1 - w0));
                        for (int h = h0; h < h1; ++h) {
                            for (int w = w0; w < w1; ++w) {
                                gxp[static_cast<std::int64_t>(h) * d.w + w] += g;
                            }
                        }
                    }
                }
            });
        });

    const float* xd = x.data();
    float* od = out.data();
    const std::int64_t planes = static_cast<std::int64_t>(d.n) * d.c;
    const std::int64_t in_plane = static_cast<std::int64_t>(d.h) * d.w;
    const std::int64_t out_plane = static_cast<std::int64_t>(bin_h) * bin_w;
    parallel_for(planes, [&](std::int64_t p) {
        const float* xp = xd + p * in_plane;
        float* op = od + p * out_plane;
        for (int bh = 0; bh < bin_h; ++bh) {
            int h0 = region_start(bh, d.h, bin_h), h1 = region_end(bh, d.h, bin_h);
            for (int bw = 0; bw < bin_w; ++bw) {
                int w0 = region_start(bw, d.w, bin_w), w1 = region_end(bw, d.w, bin_w);
                double s = 0.0;
                for (int h = h0; h < h1; ++h) {
                    for (int w = w0; w < w1; ++w) s += xp[static_cast<std::int64_t>(h) * d.w + w];
                }
                op[static_cast<std::int64_t>(bh) * bin_w + bw] =
                    static_cast<float>(s / ((h1 - h0) * (w1 - w0)));
            }
        }
    });
    return out;
}

std::pair<Tensor, Tensor> channel_mean_max(const Tensor& x) {
    Dims4 d = dims4(x, "channel_mean_max");
    if (d.c < 1) throw ShapeError("channel_mean_max requires at least one channel");
    const std::int64_t plane = static_cast<std::int64_t>(d.h) * d.w;
    const std::int64_t out_n = static_cast<std::int64_t>(d.n) * plane;

    std::vector<float> mean_vals(static_cast<std::size_t>(out_n));
    std::vector<float> max_vals(static_cast<std::size_t>(out_n));
    std::vector<std::int32_t> argmax;  // first winner per pixel
    bool track = needs_grad({&x});
    if (track) argmax.resize(static_cast<std::size_t>(out_n));

    const float* xd = x.data();
    parallel_for(d.n, [&](std::int64_t n) {
        const float* base = xd + n * d.c * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            double s = base[i];
            float best = base[i];
            std::int32_t best_c = 0;
            for (int c = 1; c < d.c; ++c) {
                float v = base[static_cast<std::int64_t>(c) * plane + i];
                s += v;
                if (v > best) {
                    best = v;
                    best_c = c;
                }
            }
            mean_vals[static_cast<std::size_t>(n * plane + i)] = static_cast<float>(s / d.c);
            max_vals[static_cast<std::size_t>(n * plane + i)] = best;
            if (track) argmax[static_cast<std::size_t>(n * plane + i)] = best_c;
        }
    });

    Tensor mean_out = Tensor::make_node({d.n, 1, d.h, d.w}, {x}, [x, d, plane](detail::Node& self) {
        if (!x.requires_grad()) return;
        auto& gx = Tensor(x).grad_vec();
        const float* go = self.grad.data();
        const float inv_c = 1.0f / static_cast<float>(d.c);
        for (int n = 0; n < d.n; ++n) {
            for (int c = 0; c < d.c; ++c) {
                std::int64_t base = (static_cast<std::int64_t>(n) * d.c + c) * plane;
                const float* gop = go + static_cast<std::int64_t>(n) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    gx[static_cast<std::size_t>(base + i)] += gop[i] * inv_c;
                }
            }
        }
    });
    std::copy(mean_vals.begin(), mean_vals.end(), mean_out.data());

    Tensor max_out =
        Tensor::make_node({d.n, 1, d.h, d.w}, {x}, [x, d, plane, argmax](detail::Node& self) {
            if (!x.requires_grad()) return;
            auto& gx = Tensor(x).grad_vec();
            const float* go = self.grad.data();
            for (int n = 0; n < d.n; ++n) {
                const float* gop = go + static_cast<std::int64_t>(n) * plane;
                const std::int32_t* am = argmax.data() + static_cast<std::int64_t>(n) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    std::int64_t idx = (static_cast<std::int64_t>(n) * d.c + am[i]) * plane + i;
                    gx[static_cast<std::size_t>(idx)] += gop[i];
                }
            }
        });
    std::copy(max_vals.begin(), max_vals.end(), max_out.data());
    return {mean_out, max_out};
}

std::pair<Tensor, Tensor> spatial_avg_max_pool(const Tensor& x) {
    Dims4 d = dims4(x, "spatial_avg_max_pool");
    const std::int64_t plane = static_cast<std::int64_t>(d.h) * d.w;
    if (plane < 1) throw ShapeError("spatial_avg_max_pool requires a non-empty spatial extent");
    const std::int64_t nc = static_cast<std::int64_t>(d.n) * d.c;

    Tensor avg_out = Tensor::make_node({d.n, d.c, 1, 1}, {x}, [x, plane, nc](detail::Node& self) {
        if (!x.requires_grad()) return;
        auto& gx = Tensor(x).grad_vec();
        const float* go = self.grad.data();
        const float inv = 1.0f / static_cast<float>(plane);
        for (std::int64_t p = 0; p < nc; ++p) {
            float g = go[p] * inv;
            float* gxp = gx.data() + p * plane;
            for (std::int64_t i = 0; i < plane; ++i) gxp[i] += g;
        }
    });

    std::vector<std::int32_t> argmax;
    bool track = needs_grad({&x});
    if (track) argmax.resize(static_cast<std::size_t>(nc));

    const float* xd = x.data();
    float* ad = avg_out.data();
    std::vector<float> maxvals(static_cast<std::size_t>(nc));
    parallel_for(nc, [&](std::int64_t p) {
        const float* xp = xd + p * plane;
        double s = xp[0];
        float best = xp[0];
        std::int32_t bi = 0;
        for (std::int64_t i = 1; i < plane; ++i) {
            s += xp[i];
            if (xp[i] > best) {
                best = xp[i];
                bi = static_cast<std::int32_t>(i);
            }
        }
        ad[p] = static_cast<float>(s / static_cast<double>(plane));
        maxvals[static_cast<std::size_t>(p)] = best;
        if (track) argmax[static_cast<std::size_t>(p)] = bi;
    });

    Tensor max_out =
        Tensor::make_node({d.n, d.c, 1, 1}, {x}, [x, plane, nc, argmax](detail::Node& self) {
            if (!x.requires_grad()) return;
            auto& gx = Tensor(x).grad_vec();
            const float* go = self.grad.data();
            for (std::int64_t p = 0; p < nc; ++p) {
                gx[static_cast<std::size_t>(p * plane + argmax[static_cast<std::size_t>(p)])] +=
                    go[p];
            }
        });
    std::copy(maxvals.begin(), maxvals.end(), max_out.data());
    return {avg_out, max_out};
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const Shape& first = parts.front().shape();
    int rank = static_cast<int>(first.size());
    if (axis < 0 || axis >= rank) throw ShapeError("concat axis out of range");
    Shape out_shape = first;
    out_shape[static_cast<std::size_t>(axis)] = 0;
    for (const Tensor& t : parts) {
        if (t.ndim() != rank) {
            throw ShapeError("concat rank mismatch: " + shape_str(first) + " vs " +
                             shape_str(t.shape()));
        }
        for (int a = 0; a < rank; ++a) {
            if (a == axis) continue;
            if (t.dim(a) != first[static_cast<std::size_t>(a)]) {
                throw ShapeError("concat mismatch on axis " + std::to_string(a) + ": " +
                                 shape_str(first) + " vs " + shape_str(t.shape()));
            }
        }
        out_shape[static_cast<std::size_t>(axis)] += t.dim(axis);
    }

    std::int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= first[static_cast<std::size_t>(a)];
    for (int a = axis + 1; a < rank; ++a) inner *= first[static_cast<std::size_t>(a)];
    const std::int64_t out_axis = out_shape[static_cast<std::size_t>(axis)];

    std::vector<Tensor> inputs = parts;
    Tensor out = Tensor::make_node(
        out_shape, std::move(inputs), [parts, outer, inner, out_axis, axis](detail::Node& self) {
            const float* go = self.grad.data();
            std::int64_t offset = 0;
            for (const Tensor& t : parts) {
                std::int64_t extent = t.dim(axis);
                if (t.requires_grad()) {
                    auto& gx = Tensor(t).grad_vec();
                    for (std::int64_t o = 0; o < outer; ++o) {
                        const float* src = go + (o * out_axis + offset) * inner;
                        float* dst = gx.data() + o * extent * inner;
                        for (std::int64_t i = 0; i < extent * inner; ++i) dst[i] += src[i];
                    }
                }
                offset += extent;
            }
        });

    float* od = out.data();
    std::int64_t offset = 0;
    for (const Tensor& t : parts) {
        std::int64_t extent = t.dim(axis);
        const float* src = t.data();
        for (std::int64_t o = 0; o < outer; ++o) {
            std::copy(src + o * extent * inner, src + (o + 1) * extent * inner,
                      od + (o * out_axis + offset) * inner);
        }
        offset += extent;
    }
    return out;
}

namespace {

enum class Broadcast { Same, Scalar, SpatialMap, ChannelVec };

// b is broadcast against full-shaped a.
Broadcast broadcast_kind(const Shape& a, const Shape& b) {
    if (shape_eq(a, b)) return Broadcast::Same;
    if (shape_numel(b) == 1) return Broadcast::Scalar;
    if (a.size() == 4 && b.size() == 4 && b[0] == a[0]) {
        if (b[1] == 1 && b[2] == a[2] && b[3] == a[3]) return Broadcast::SpatialMap;
        if (b[1] == a[1] && b[2] == 1 && b[3] == 1) return Broadcast::ChannelVec;
    }
    int axes = static_cast<int>(std::max(a.size(), b.size()));
    for (int i = 0; i < axes; ++i) {
        std::size_t ia = a.size() - 1 - static_cast<std::size_t>(i);
        std::size_t ib = b.size() - 1 - static_cast<std::size_t>(i);
        int da = i < static_cast<int>(a.size()) ? a[ia] : 1;
        int db = i < static_cast<int>(b.size()) ? b[ib] : 1;
        if (da != db) {
            throw ShapeError("incompatible shapes " + shape_str(a) + " and " + shape_str(b) +
                             " on axis " + std::to_string(static_cast<int>(std::max(
                                               a.size(), b.size())) - 1 - i));
        }
    }
    throw ShapeError("unsupported broadcast between " + shape_str(a) + " and " + shape_str(b));
}

// Index of the broadcast operand element feeding full index `i`.
struct BroadcastIndex {
    Broadcast kind;
    std::int64_t c, plane;  // dims of the full shape

    std::int64_t operator()(std::int64_t i) const {
        switch (kind) {
            case Broadcast::Same:
                return i;
            case Broadcast::Scalar:
                return 0;
            case Broadcast::SpatialMap: {
                std::int64_t n = i / (c * plane);
                return n * plane + i % plane;
            }
            case Broadcast::ChannelVec:
                return i / plane;
        }
        return 0;
    }
};

BroadcastIndex make_index(const Shape& full, Broadcast kind) {
    BroadcastIndex bi{kind, 1, 1};
    if (full.size() == 4) {
        bi.c = full[1];
        bi.plane = static_cast<std::int64_t>(full[2]) * full[3];
    }
    return bi;
}

template <typename Fwd, typename BackA, typename BackB>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, BackA back_a, BackB back_b) {
    // Orient so the first operand carries the full shape.
    bool swapped = shape_numel(a.shape()) < shape_numel(b.shape());
    const Tensor& full = swapped ? b : a;
    const Tensor& other = swapped ? a : b;
    Broadcast kind = broadcast_kind(full.shape(), other.shape());
    BroadcastIndex bidx = make_index(full.shape(), kind);

    Tensor out = Tensor::make_node(
        full.shape(), {a, b},
        [a, b, full, other, bidx, swapped, back_a, back_b](detail::Node& self) {
            const float* go = self.grad.data();
            const float* fd = full.data();
            const float* od2 = other.data();
            if (full.requires_grad()) {
                auto& gf = Tensor(full).grad_vec();
                for (std::int64_t i = 0; i < self.numel(); ++i) {
                    std::int64_t j = bidx(i);
                    gf[static_cast<std::size_t>(i)] +=
                        swapped ? back_b(go[i], od2[j], fd[i]) : back_a(go[i], fd[i], od2[j]);
                }
            }
            if (other.requires_grad()) {
                // Fixed-order reduction over the broadcast axes.
                auto& go2 = Tensor(other).grad_vec();
                for (std::int64_t i = 0; i < self.numel(); ++i) {
                    std::int64_t j = bidx(i);
                    go2[static_cast<std::size_t>(j)] +=
                        swapped ? back_a(go[i], od2[j], fd[i]) : back_b(go[i], fd[i], od2[j]);
                }
            }
        });

    const float* fd = full.data();
    const float* od2 = other.data();
    float* od = out.data();
    parallel_chunks(out.numel(), [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
            std::int64_t j = bidx(i);
            od[i] = swapped ? fwd(od2[j], fd[i]) : fwd(fd[i], od2[j]);
        }
    });
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](float x, float y) { return x + y; },
        [](float g, float, float) { return g; }, [](float g, float, float) { return g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](float x, float y) { return x * y; },
        [](float g, float, float y) { return g * y; }, [](float g, float x, float) { return g * x; });
}

Tensor affine(const Tensor& x, float k, float c) {
    Tensor out = Tensor::make_node(x.shape(), {x}, [x, k](detail::Node& self) {
        if (!x.requires_grad()) return;
        auto& gx = Tensor(x).grad_vec();
        const float* go = self.grad.data();
        for (std::int64_t i = 0; i < self.numel(); ++i) gx[static_cast<std::size_t>(i)] += go[i] * k;
    });
    const float* xd = x.data();
    float* od = out.data();
    parallel_chunks(x.numel(), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) od[i] = k * xd[i] + c;
    });
    return out;
}

Tensor sum(const Tensor& x) {
    Tensor out = Tensor::make_node({1}, {x}, [x](detail::Node& self) {
        if (!x.requires_grad()) return;
        auto& gx = Tensor(x).grad_vec();
        const float g = self.grad[0];
        for (float& v : gx) v += g;
    });
    double s = 0.0;
    const float* xd = x.data();
    for (std::int64_t i = 0; i < x.numel(); ++i) s += xd[i];
    out.data()[0] = static_cast<float>(s);
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, int stride, int padding) {
    return conv2d(x, weight, Tensor(), stride, padding);
}

}  // namespace liteseg
