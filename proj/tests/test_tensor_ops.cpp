#include <doctest.h>

#include <cmath>
#include <random>

#include "liteseg/ops.hpp"
#include "liteseg/parallel.hpp"
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

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return shape_eq(a.shape(), b.shape()) && a.vec() == b.vec();
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel over channels is the identity") {
    Tensor x = random_tensor({1, 3, 4, 4}, 11);
    Tensor w = Tensor::zeros({3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) w.vec()[static_cast<std::size_t>(c * 3 + c)] = 1.0f;
    Tensor y = conv2d(x, w, 1, 0);
    CHECK(bitwise_equal(x, y));
}

TEST_CASE("conv2d: 3x3 ones kernel on constant-one input counts the neighborhood") {
    Tensor x = Tensor::full({1, 1, 3, 3}, 1.0f);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
    Tensor y = conv2d(x, w, 1, 1);
    // interior sees all 9 taps, corners only 4
    CHECK(y.data()[4] == doctest::Approx(9.0f));
    CHECK(y.data()[0] == doctest::Approx(4.0f));
    CHECK(y.data()[2] == doctest::Approx(4.0f));
    CHECK(y.data()[6] == doctest::Approx(4.0f));
    CHECK(y.data()[8] == doctest::Approx(4.0f));
    CHECK(y.data()[1] == doctest::Approx(6.0f));
}

TEST_CASE("conv2d: random case matches the naive loop oracle within 1e-6") {
    Tensor x = random_tensor({2, 3, 8, 8}, 21);
    Tensor w = random_tensor({4, 3, 3, 3}, 22);
    Tensor b = random_tensor({4}, 23);

    SUBCASE("stride 1, no padding") {
        Tensor y = conv2d(x, w, b, 1, 0);
        ref::RefTensor want = ref::conv2d(ref::from_tensor(x), ref::from_tensor(w),
                                          ref::from_tensor(b), 1, 0);
        CHECK(ref::max_abs_diff(y, want) < 1e-6);
    }
    SUBCASE("stride 2, padding 1") {
        Tensor y = conv2d(x, w, b, 2, 1);
        ref::RefTensor want = ref::conv2d(ref::from_tensor(x), ref::from_tensor(w),
                                          ref::from_tensor(b), 2, 1);
        CHECK(shape_eq(y.shape(), {2, 4, 4, 4}));
        CHECK(ref::max_abs_diff(y, want) < 1e-6);
    }
}

TEST_CASE("conv2d: shape errors carry both shapes") {
    Tensor x = Tensor::zeros({1, 3, 4, 4});
    Tensor w = Tensor::zeros({2, 5, 3, 3});
    CHECK_THROWS_WITH_AS(conv2d(x, w, 1, 1), doctest::Contains("[1,3,4,4]"), ShapeError);
    CHECK_THROWS_WITH_AS(conv2d(x, w, 1, 1), doctest::Contains("[2,5,3,3]"), ShapeError);
    Tensor big = Tensor::zeros({2, 3, 9, 9});
    CHECK_THROWS_AS(conv2d(x, big, 1, 0), ShapeError);
    Tensor w_ok = Tensor::zeros({2, 3, 3, 3});
    Tensor bad_bias = Tensor::zeros({3});
    CHECK_THROWS_AS(conv2d(x, w_ok, bad_bias, 1, 1), ShapeError);
}

TEST_CASE("batch_norm: eval with unit statistics is the identity up to eps") {
    Tensor x = random_tensor({2, 3, 4, 4}, 31);
    Tensor gamma = Tensor::full({3}, 1.0f);
    Tensor beta = Tensor::zeros({3});
    Tensor rm = Tensor::zeros({3});
    Tensor rv = Tensor::full({3}, 1.0f);
    Tensor y = batch_norm(x, gamma, beta, rm, rv, 1e-5f, 0.9f, false);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        CHECK(std::abs(y.data()[i] - x.data()[i]) <= 1e-5f);
    }
}

TEST_CASE("batch_norm: training on constant input returns beta everywhere") {
    Tensor x = Tensor::full({2, 2, 3, 3}, 4.75f);
    Tensor gamma = Tensor::full({2}, 1.3f);
    Tensor beta = Tensor::from_vector({2}, {0.25f, -1.5f});
    Tensor rm = Tensor::zeros({2});
    Tensor rv = Tensor::full({2}, 1.0f);
    Tensor y = batch_norm(x, gamma, beta, rm, rv, 1e-5f, 0.9f, true);
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 9; ++i) {
            CHECK(y.data()[c * 9 + i] == doctest::Approx(beta.data()[c]).epsilon(1e-6));
        }
    }
}

TEST_CASE("batch_norm: training statistics are 0/1 before the affine step") {
    Tensor x = random_tensor({4, 3, 6, 6}, 41, -2.0f, 2.0f);
    Tensor gamma = Tensor::full({3}, 1.0f);
    Tensor beta = Tensor::zeros({3});
    Tensor rm = Tensor::zeros({3});
    Tensor rv = Tensor::full({3}, 1.0f);
    Tensor y = batch_norm(x, gamma, beta, rm, rv, 1e-5f, 0.9f, true);
    const std::int64_t plane = 36, per_channel = 4 * plane;
    for (int c = 0; c < 3; ++c) {
        double s = 0.0, s2 = 0.0;
        for (int n = 0; n < 4; ++n) {
            for (std::int64_t i = 0; i < plane; ++i) {
                float v = y.data()[(n * 3 + c) * plane + i];
                s += v;
                s2 += static_cast<double>(v) * v;
            }
        }
        double mean = s / per_channel;
        double var = s2 / per_channel - mean * mean;
        CHECK(std::abs(mean) < 1e-4);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }

    SUBCASE("running statistics blend with momentum") {
        // rm started at 0, rv at 1; after one step rm = 0.1*batch_mean.
        ref::RefTensor xr = ref::from_tensor(x);
        for (int c = 0; c < 3; ++c) {
            double s = 0.0, s2 = 0.0;
            for (int n = 0; n < 4; ++n) {
                for (std::int64_t i = 0; i < plane; ++i) {
                    double v = xr.data[static_cast<std::size_t>((n * 3 + c) * plane + i)];
                    s += v;
                    s2 += v * v;
                }
            }
            double mean = s / per_channel;
            double var = (s2 / per_channel - mean * mean) * per_channel / (per_channel - 1);
            CHECK(rm.data()[c] == doctest::Approx(0.1 * mean).epsilon(1e-4));
            CHECK(rv.data()[c] == doctest::Approx(0.9 + 0.1 * var).epsilon(1e-4));
        }
    }
}

TEST_CASE("batch_norm: empty batch in training mode is an error") {
    Tensor x = Tensor::zeros({0, 3, 2, 2});
    Tensor gamma = Tensor::full({3}, 1.0f);
    Tensor beta = Tensor::zeros({3});
    Tensor rm = Tensor::zeros({3});
    Tensor rv = Tensor::full({3}, 1.0f);
    CHECK_THROWS_AS(batch_norm(x, gamma, beta, rm, rv, 1e-5f, 0.9f, true), ShapeError);
}

TEST_CASE("relu and sigmoid basics") {
    Tensor x = Tensor::from_vector({5}, {-3.0f, -0.5f, 0.0f, 0.5f, 3.0f});
    Tensor r = relu(x);
    CHECK(r.vec() == std::vector<float>{0.0f, 0.0f, 0.0f, 0.5f, 3.0f});
    Tensor s = sigmoid(Tensor::from_vector({1}, {0.0f}));
    CHECK(s.data()[0] == doctest::Approx(0.5f));
}

TEST_CASE("sigmoid output stays strictly inside (0,1) even for huge inputs") {
    Tensor x = Tensor::from_vector({4}, {-200.0f, -30.0f, 30.0f, 200.0f});
    Tensor y = sigmoid(x);
    for (float v : y.vec()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("autodiff: gradient of sum(sigmoid(x)) at zero is 0.25") {
    Tensor x = Tensor::zeros({2, 3}, /*requires_grad=*/true);
    backward(sum(sigmoid(x)));
    for (float g : x.grad()) CHECK(g == doctest::Approx(0.25f));
}

TEST_CASE("autodiff: sum gradient is all ones; repeated backward accumulates") {
    Tensor x = random_tensor({3, 4}, 51);
    x.set_requires_grad(true);
    Tensor loss = sum(x);
    backward(loss);
    for (float g : x.grad()) CHECK(g == 1.0f);
    backward(loss);
    for (float g : x.grad()) CHECK(g == 2.0f);
    x.zero_grad();
    CHECK_FALSE(x.has_grad());
}

TEST_CASE("autodiff: backward on a non-scalar is an error") {
    Tensor x = random_tensor({2, 2}, 52);
    x.set_requires_grad(true);
    Tensor y = relu(x);
    CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("bilinear_upsample: constants stay constant and identity scale is exact") {
    Tensor x = Tensor::full({1, 2, 3, 3}, 0.77f);
    Tensor y = bilinear_upsample(x, 7, 5);
    for (float v : y.vec()) CHECK(v == doctest::Approx(0.77f));

    Tensor z = random_tensor({2, 3, 4, 5}, 61);
    CHECK(bitwise_equal(bilinear_upsample(z, 4, 5), z));
}

TEST_CASE("bilinear_upsample: 2x2 to 4x4 matches the closed-form interpolation") {
    Tensor x = Tensor::from_vector({1, 1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    Tensor y = bilinear_upsample(x, 4, 4);
    // corners clamp to the nearest source pixel
    CHECK(y.data()[0] == doctest::Approx(1.0f));
    CHECK(y.data()[3] == doctest::Approx(2.0f));
    CHECK(y.data()[12] == doctest::Approx(3.0f));
    CHECK(y.data()[15] == doctest::Approx(4.0f));
    // (1,1): src = 0.25 in both axes
    CHECK(y.data()[5] == doctest::Approx(1.75f));
    ref::RefTensor want = ref::bilinear_upsample(ref::from_tensor(x), 4, 4);
    CHECK(ref::max_abs_diff(y, want) < 1e-6);
}

TEST_CASE("bilinear_upsample: random case matches the oracle; bad targets fail") {
    Tensor x = random_tensor({2, 3, 5, 6}, 62);
    Tensor y = bilinear_upsample(x, 9, 11);
    CHECK(ref::max_abs_diff(y, ref::bilinear_upsample(ref::from_tensor(x), 9, 11)) < 1e-6);
    CHECK_THROWS_AS(bilinear_upsample(x, 0, 6), ShapeError);
    CHECK_THROWS_AS(bilinear_upsample(x, 4, 6), ShapeError);
}

TEST_CASE("adaptive_avg_pool: global mean, row means, identity, and errors") {
    Tensor x = random_tensor({1, 2, 4, 4}, 71);
    Tensor g = adaptive_avg_pool(x, 1, 1);
    for (int c = 0; c < 2; ++c) {
        double s = 0.0;
        for (int i = 0; i < 16; ++i) s += x.data()[c * 16 + i];
        CHECK(g.data()[c] == doctest::Approx(s / 16.0).epsilon(1e-6));
    }

    // rows hold their row index; 2x2 bins average row pairs
    Tensor rows = Tensor::zeros({1, 1, 4, 4});
    for (int h = 0; h < 4; ++h) {
        for (int w = 0; w < 4; ++w) rows.vec()[static_cast<std::size_t>(h * 4 + w)] = static_cast<float>(h);
    }
    Tensor p = adaptive_avg_pool(rows, 2, 2);
    CHECK(p.vec() == std::vector<float>{0.5f, 0.5f, 2.5f, 2.5f});

    CHECK(bitwise_equal(adaptive_avg_pool(x, 4, 4), x));
    CHECK_THROWS_AS(adaptive_avg_pool(x, 5, 4), ShapeError);

    Tensor uneven = random_tensor({2, 3, 5, 6}, 72);
    CHECK(ref::max_abs_diff(adaptive_avg_pool(uneven, 2, 2),
                            ref::adaptive_avg_pool(ref::from_tensor(uneven), 2, 2)) < 1e-6);
    CHECK(ref::max_abs_diff(adaptive_avg_pool(uneven, 3, 4),
                            ref::adaptive_avg_pool(ref::from_tensor(uneven), 3, 4)) < 1e-6);
}

TEST_CASE("channel_mean_max: single channel, two-value reduction, random oracle") {
    Tensor single = random_tensor({1, 1, 3, 3}, 81);
    auto [m1, x1] = channel_mean_max(single);
    CHECK(bitwise_equal(m1, single));
    CHECK(bitwise_equal(x1, single));

    Tensor two = Tensor::from_vector({1, 2, 1, 1}, {1.0f, 3.0f});
    auto [m2, x2] = channel_mean_max(two);
    CHECK(m2.data()[0] == doctest::Approx(2.0f));
    CHECK(x2.data()[0] == doctest::Approx(3.0f));

    Tensor r = random_tensor({2, 5, 4, 6}, 82);
    auto [mr, xr] = channel_mean_max(r);
    auto [wm, wx] = ref::channel_mean_max(ref::from_tensor(r));
    CHECK(ref::max_abs_diff(mr, wm) < 1e-6);
    CHECK(ref::max_abs_diff(xr, wx) == 0.0);  // max is an exact selection
}

TEST_CASE("spatial_avg_max_pool: degenerate, small, constant cases") {
    Tensor one = random_tensor({2, 3, 1, 1}, 91);
    auto [a1, m1] = spatial_avg_max_pool(one);
    CHECK(bitwise_equal(a1, one));
    CHECK(bitwise_equal(m1, one));

    Tensor vals = Tensor::from_vector({1, 1, 2, 2}, {0.0f, 1.0f, 2.0f, 3.0f});
    auto [a2, m2] = spatial_avg_max_pool(vals);
    CHECK(a2.data()[0] == doctest::Approx(1.5f));
    CHECK(m2.data()[0] == doctest::Approx(3.0f));

    Tensor c = Tensor::full({2, 2, 3, 3}, -0.37f);
    auto [a3, m3] = spatial_avg_max_pool(c);
    for (float v : a3.vec()) CHECK(v == doctest::Approx(-0.37f));
    for (float v : m3.vec()) CHECK(v == doctest::Approx(-0.37f));
}

TEST_CASE("concat: four spatial-attention maps stack to 4 channels") {
    std::vector<Tensor> parts;
    for (int i = 0; i < 4; ++i) parts.push_back(random_tensor({2, 1, 3, 5}, 100 + i));
    Tensor cat = concat(parts, 1);
    CHECK(shape_eq(cat.shape(), {2, 4, 3, 5}));
    // block copy per part
    for (int n = 0; n < 2; ++n) {
        for (int c = 0; c < 4; ++c) {
            for (int i = 0; i < 15; ++i) {
                CHECK(cat.data()[(n * 4 + c) * 15 + i] == parts[c].data()[n * 15 + i]);
            }
        }
    }
    CHECK_THROWS_WITH_AS(concat({parts[0], random_tensor({2, 1, 4, 5}, 1)}, 1),
                         doctest::Contains("axis 2"), ShapeError);
}

TEST_CASE("add/mul: x*1 + y*0 == x bitwise and broadcasts match the oracle") {
    Tensor x = random_tensor({2, 3, 4, 4}, 111);
    Tensor y = random_tensor({2, 3, 4, 4}, 112);
    Tensor got = add(mul(x, Tensor::scalar(1.0f)), mul(y, Tensor::scalar(0.0f)));
    CHECK(bitwise_equal(got, x));

    Tensor spatial = random_tensor({2, 1, 4, 4}, 113);
    CHECK(ref::max_abs_diff(mul(x, spatial),
                            ref::mul(ref::from_tensor(x), ref::from_tensor(spatial))) < 1e-6);
    Tensor channel = random_tensor({2, 3, 1, 1}, 114);
    CHECK(ref::max_abs_diff(add(x, channel),
                            ref::add(ref::from_tensor(x), ref::from_tensor(channel))) < 1e-6);
    // order of operands must not matter for the broadcast
    CHECK(bitwise_equal(mul(x, spatial), mul(spatial, x)));

    CHECK_THROWS_WITH_AS(add(x, random_tensor({2, 3, 4, 5}, 115)), doctest::Contains("axis"),
                         ShapeError);
    CHECK_THROWS_AS(mul(x, random_tensor({2, 2, 4, 4}, 116)), ShapeError);
}

TEST_CASE("determinism: kernels are bit-identical for any worker count") {
    const int saved = num_threads();
    Tensor x = random_tensor({2, 4, 16, 16}, 121);
    Tensor w = random_tensor({8, 4, 3, 3}, 122);

    std::vector<std::vector<float>> conv_runs, up_runs;
    for (int threads : {1, 2, 4}) {
        set_num_threads(threads);
        conv_runs.push_back(conv2d(x, w, 1, 1).vec());
        up_runs.push_back(bilinear_upsample(x, 33, 40).vec());
    }
    set_num_threads(saved);
    CHECK(conv_runs[0] == conv_runs[1]);
    CHECK(conv_runs[0] == conv_runs[2]);
    CHECK(up_runs[0] == up_runs[1]);
    CHECK(up_runs[0] == up_runs[2]);
}

TEST_CASE("assert_finite flags NaN tensors") {
    Tensor x = Tensor::from_vector({2}, {1.0f, std::nanf("")});
    CHECK_FALSE(x.all_finite());
    CHECK_THROWS_AS(x.assert_finite("weights"), NumericError);
}
