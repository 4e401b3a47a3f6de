#include "liteseg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "liteseg/augment.hpp"

namespace liteseg {

BenchReport run_bench(PPLiteSeg& model, int res_h, int res_w, int warmup, int runs,
                      bool include_resize, std::uint64_t seed) {
    if (warmup < 1) throw ConfigError("bench requires warmup >= 1");
    if (runs < 3) throw ConfigError("bench requires runs >= 3");
    if (res_h % 32 != 0 || res_w % 32 != 0) {
        throw ConfigError("bench resolution must be divisible by 32");
    }

    BenchReport report;
    report.res_h = res_h;
    report.res_w = res_w;
    report.orig_h = 2 * res_h;
    report.orig_w = 2 * res_w;
    report.warmup_runs = warmup;
    report.timed_runs = runs;
    report.includes_resize = include_resize;

    // Fixed random capture-size input, built outside the timed region.
    std::mt19937 rng = derive_rng(seed, 0xBE7C);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    Tensor original = Tensor::zeros({3, report.orig_h, report.orig_w});
    for (float& v : original.vec()) v = unit(rng);

    NoGradGuard guard;
    // Pre-resized input for the infer-only mode, outside the timed region.
    Tensor prepared = resize_image_bilinear(original, res_h, res_w);
    Tensor prepared_batch = Tensor::from_vector({1, 3, res_h, res_w}, prepared.vec());

    auto one_pass = [&]() {
        if (include_resize) {
            Tensor resized = resize_image_bilinear(original, res_h, res_w);
            Tensor input = Tensor::from_vector({1, 3, res_h, res_w}, std::move(resized.vec()));
            LabelMap pred = model.predict(input);
            return resize_labels_nearest(pred, report.orig_h, report.orig_w);
        }
        return model.predict(prepared_batch);
    };

    for (int i = 0; i < warmup; ++i) one_pass();

    report.run_ms.reserve(static_cast<std::size_t>(runs));
    for (int i = 0; i < runs; ++i) {
        auto start = std::chrono::steady_clock::now();
        one_pass();
        auto stop = std::chrono::steady_clock::now();
        report.run_ms.push_back(
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(stop - start)
                .count());
    }

    report.min_ms = *std::min_element(report.run_ms.begin(), report.run_ms.end());
    report.max_ms = *std::max_element(report.run_ms.begin(), report.run_ms.end());
    double total = 0.0;
    for (double ms : report.run_ms) total += ms;
    report.mean_ms = total / static_cast<double>(runs);
    report.fps = 1000.0 / report.mean_ms;
    return report;
}

}  // namespace liteseg
