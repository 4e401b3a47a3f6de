#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "liteseg/ops.hpp"
#include "liteseg/parallel.hpp"

namespace liteseg {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Output positions per GEMM tile and weight-gradient row chunk. Both are
// fixed constants so results do not depend on the worker count.
constexpr std::int64_t kTileM = 2048;
constexpr int kRowChunk = 64;

struct ConvGeom {
    int n, in_c, h, w;
    int out_c, kh, kw;
    int stride, padding;
    int out_h, out_w;
    std::int64_t k;          // in_c * kh * kw
    std::int64_t out_plane;  // out_h * out_w
    std::int64_t in_plane;   // h * w
    bool identity_cols;      // 1x1 kernel, stride 1, no padding
};

ConvGeom conv_geometry(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride,
                       int padding) {
    if (x.ndim() != 4 || weight.ndim() != 4) {
        throw ShapeError("conv2d expects 4-D input and weight, got " + shape_str(x.shape()) +
                         " and " + shape_str(weight.shape()));
    }
    if (stride < 1) throw ConfigError("conv2d stride must be >= 1");
    if (padding < 0) throw ConfigError("conv2d padding must be >= 0");
    ConvGeom g;
    g.n = x.dim(0);
    g.in_c = x.dim(1);
    g.h = x.dim(2);
    g.w = x.dim(3);
    g.out_c = weight.dim(0);
    g.kh = weight.dim(2);
    g.kw = weight.dim(3);
    g.stride = stride;
    g.padding = padding;
    if (weight.dim(1) != g.in_c) {
        throw ShapeError("conv2d channel mismatch: input " + shape_str(x.shape()) +
                         " vs weight " + shape_str(weight.shape()));
    }
    if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding) {
        throw ShapeError("conv2d kernel " + shape_str(weight.shape()) +
                         " does not fit padded input " + shape_str(x.shape()));
    }
    if (bias.defined() && bias.numel() != g.out_c) {
        throw ShapeError("conv2d bias length " + std::to_string(bias.numel()) +
                         " does not match " + std::to_string(g.out_c) + " output channels");
    }
    g.out_h = (g.h + 2 * padding - g.kh) / stride + 1;
    g.out_w = (g.w + 2 * padding - g.kw) / stride + 1;
    g.k = static_cast<std::int64_t>(g.in_c) * g.kh * g.kw;
    g.out_plane = static_cast<std::int64_t>(g.out_h) * g.out_w;
    g.in_plane = static_cast<std::int64_t>(g.h) * g.w;
    g.identity_cols = g.kh == 1 && g.kw == 1 && stride == 1 && padding == 0;
    return g;
}

// Gathers columns m0..m1 of the im2col matrix (k rows) for one sample.
void im2col_tile(const float* xn, const ConvGeom& g, std::int64_t m0, std::int64_t m1,
                 float* col) {
    const std::int64_t tile = m1 - m0;
    for (int c = 0; c < g.in_c; ++c) {
        const float* plane = xn + static_cast<std::int64_t>(c) * g.in_plane;
        for (int ki = 0; ki < g.kh; ++ki) {
            for (int kj = 0; kj < g.kw; ++kj) {
                float* row = col + ((static_cast<std::int64_t>(c) * g.kh + ki) * g.kw + kj) * tile;
                for (std::int64_t m = m0; m < m1; ++m) {
                    int oh = static_cast<int>(m / g.out_w);
                    int ow = static_cast<int>(m % g.out_w);
                    int ih = oh * g.stride - g.padding + ki;
                    int iw = ow * g.stride - g.padding + kj;
                    row[m - m0] = (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w)
                                      ? plane[static_cast<std::int64_t>(ih) * g.w + iw]
                                      : 0.0f;
                }
            }
        }
    }
}

// Scatter-adds columns m0..m1 back into one sample's input gradient.
void col2im_tile(const float* col, const ConvGeom& g, std::int64_t m0, std::int64_t m1,
                 float* gxn) {
    const std::int64_t tile = m1 - m0;
    for (int c = 0; c < g.in_c; ++c) {
        float* plane = gxn + static_cast<std::int64_t>(c) * g.in_plane;
        for (int ki = 0; ki < g.kh; ++ki) {
            for (int kj = 0; kj < g.kw; ++kj) {
                const float* row =
                    col + ((static_cast<std::int64_t>(c) * g.kh + ki) * g.kw + kj) * tile;
                for (std::int64_t m = m0; m < m1; ++m) {
                    int oh = static_cast<int>(m / g.out_w);
                    int ow = static_cast<int>(m % g.out_w);
                    int ih = oh * g.stride - g.padding + ki;
                    int iw = ow * g.stride - g.padding + kj;
                    if (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w) {
                        plane[static_cast<std::int64_t>(ih) * g.w + iw] += row[m - m0];
                    }
                }
            }
        }
    }
}

void conv_backward(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeom& g,
                   const std::vector<float>& grad_out) {
    const std::int64_t ntiles = (g.out_plane + kTileM - 1) / kTileM;
    const float* go = grad_out.data();

    if (bias.defined() && bias.requires_grad()) {
        auto& gb = Tensor(bias).grad_vec();
        for (int n = 0; n < g.n; ++n) {
            for (int oc = 0; oc < g.out_c; ++oc) {
                const float* p = go + (static_cast<std::int64_t>(n) * g.out_c + oc) * g.out_plane;
                double s = 0.0;
                for (std::int64_t i = 0; i < g.out_plane; ++i) s += p[i];
                gb[static_cast<std::size_t>(oc)] += static_cast<float>(s);
            }
        }
    }

    if (weight.requires_grad()) {
        auto& gw = Tensor(weight).grad_vec();
        const int nchunks = (g.out_c + kRowChunk - 1) / kRowChunk;
        std::vector<float> col;
        if (!g.identity_cols) col.resize(static_cast<std::size_t>(g.k * std::min(kTileM, g.out_plane)));
        for (int n = 0; n < g.n; ++n) {
            const float* xn = x.data() + static_cast<std::int64_t>(n) * g.in_c * g.in_plane;
            for (std::int64_t t = 0; t < ntiles; ++t) {
                std::int64_t m0 = t * kTileM;
                std::int64_t m1 = std::min(g.out_plane, m0 + kTileM);
                const float* col_ptr;
                std::int64_t col_stride;
                if (g.identity_cols) {
                    col_ptr = xn + m0;
                    col_stride = g.in_plane;
                } else {
                    im2col_tile(xn, g, m0, m1, col.data());
                    col_ptr = col.data();
                    col_stride = m1 - m0;
                }
                ConstStridedMap col_map(col_ptr, g.k, m1 - m0, Eigen::OuterStride<>(col_stride));
                const float* go_n = go + static_cast<std::int64_t>(n) * g.out_c * g.out_plane + m0;
                ConstStridedMap go_map(go_n, g.out_c, m1 - m0, Eigen::OuterStride<>(g.out_plane));
                MapMat gw_map(gw.data(), g.out_c, g.k);
                parallel_for(nchunks, [&](std::int64_t chunk) {
                    int r0 = static_cast<int>(chunk) * kRowChunk;
                    int rc = std::min(kRowChunk, g.out_c - r0);
                    gw_map.middleRows(r0, rc).noalias() +=
                        go_map.middleRows(r0, rc) * col_map.transpose();
                });
            }
        }
    }

    if (x.requires_grad()) {
        auto& gx = Tensor(x).grad_vec();
        const float* wd = weight.data();
        ConstMapMat w_map(wd, g.out_c, g.k);
        parallel_for(g.n, [&](std::int64_t n) {
            std::vector<float> colgrad(static_cast<std::size_t>(g.k * std::min(kTileM, g.out_plane)));
            float* gxn = gx.data() + n * g.in_c * g.in_plane;
            for (std::int64_t t = 0; t < ntiles; ++t) {
                std::int64_t m0 = t * kTileM;
                std::int64_t m1 = std::min(g.out_plane, m0 + kTileM);
                const float* go_n = go + n * g.out_c * g.out_plane + m0;
                ConstStridedMap go_map(go_n, g.out_c, m1 - m0, Eigen::OuterStride<>(g.out_plane));
                if (g.identity_cols) {
                    StridedMap gx_map(gxn + m0, g.k, m1 - m0, Eigen::OuterStride<>(g.in_plane));
                    gx_map.noalias() += w_map.transpose() * go_map;
                } else {
                    MapMat cg_map(colgrad.data(), g.k, m1 - m0);
                    cg_map.noalias() = w_map.transpose() * go_map;
                    col2im_tile(colgrad.data(), g, m0, m1, gxn);
                }
            }
        });
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
    ConvGeom g = conv_geometry(x, weight, bias, stride, padding);

    Tensor out = Tensor::make_node(
        {g.n, g.out_c, g.out_h, g.out_w},
        bias.defined() ? std::vector<Tensor>{x, weight, bias} : std::vector<Tensor>{x, weight},
        [x, weight, bias, g](detail::Node& self) { conv_backward(x, weight, bias, g, self.grad); });

    const float* xd = x.data();
    const float* wd = weight.data();
    float* od = out.data();
    ConstMapMat w_map(wd, g.out_c, g.k);
    const std::int64_t ntiles = (g.out_plane + kTileM - 1) / kTileM;
    parallel_for(static_cast<std::int64_t>(g.n) * ntiles, [&](std::int64_t item) {
        std::int64_t n = item / ntiles;
        std::int64_t t = item % ntiles;
        std::int64_t m0 = t * kTileM;
        std::int64_t m1 = std::min(g.out_plane, m0 + kTileM);
        const float* xn = xd + n * g.in_c * g.in_plane;

        std::vector<float> col;
        const float* col_ptr;
        std::int64_t col_stride;
        if (g.identity_cols) {
            col_ptr = xn + m0;
            col_stride = g.in_plane;
        } else {
            col.resize(static_cast<std::size_t>(g.k * (m1 - m0)));
            im2col_tile(xn, g, m0, m1, col.data());
            col_ptr = col.data();
            col_stride = m1 - m0;
        }
        ConstStridedMap col_map(col_ptr, g.k, m1 - m0, Eigen::OuterStride<>(col_stride));
        StridedMap out_map(od + n * g.out_c * g.out_plane + m0, g.out_c, m1 - m0,
                           Eigen::OuterStride<>(g.out_plane));
        out_map.noalias() = w_map * col_map;
        if (bias.defined()) {
            const float* bd = bias.data();
            for (int oc = 0; oc < g.out_c; ++oc) out_map.row(oc).array() += bd[oc];
        }
    });
    return out;
}

}  // namespace liteseg
