#pragma once

#include "liteseg/model.hpp"

namespace liteseg {

// End-to-end latency of resize -> infer -> resize back to the original size,
// all three steps timed; FPS = 1000 / mean_ms over the timed runs only.
struct BenchReport {
    int res_h = 0, res_w = 0;         // inference resolution
    int orig_h = 0, orig_w = 0;       // simulated capture resolution
    int warmup_runs = 0;
    int timed_runs = 0;
    bool includes_resize = true;
    std::vector<double> run_ms;
    double mean_ms = 0.0, min_ms = 0.0, max_ms = 0.0;
    double fps = 0.0;
};

// Fixed random input in eval mode; model construction and checkpoint loading
// are outside the timed region. The simulated original image is 2x the
// inference resolution per axis.
BenchReport run_bench(PPLiteSeg& model, int res_h, int res_w, int warmup, int runs,
                      bool include_resize = true, std::uint64_t seed = 0);

}  // namespace liteseg
