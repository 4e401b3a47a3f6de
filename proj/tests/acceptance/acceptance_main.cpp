// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "liteseg/bench.hpp"
#include "liteseg/checkpoint.hpp"
#include "liteseg/train.hpp"
#include "ref_blocks.hpp"

using namespace liteseg;

namespace {

int g_failures = 0;

void report(const char* name, bool pass, const std::string& details) {
    std::printf("%s - %s: %s\n", pass ? "PASS" : "FAIL", name, details.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Tensor random_tensor(const Shape& shape, std::uint32_t seed, float lo = -1.0f, float hi = 1.0f) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    Tensor t = Tensor::zeros(shape);
    for (float& v : t.vec()) v = dist(rng);
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    }
    return worst;
}

// Criterion 1: finite-difference gradient suite over every differentiable op
// and composite block, relative error < 1e-3, within 5 minutes.
void criterion_gradient_suite() {
    auto start = std::chrono::steady_clock::now();
    auto results = check::run_gradcheck_suite(42, /*verbose=*/false);
    double elapsed = seconds_since(start);
    double worst = 0.0;
    int failed = 0;
    for (const auto& r : results) {
        worst = std::max(worst, r.max_rel_err);
        failed += !r.pass;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu checks, worst rel err %.2e, %.1f s (limit 300 s)",
                  results.size(), worst, elapsed);
    report("gradient-suite", failed == 0 && worst < 1e-3 && elapsed < 300.0, buf);
}

// Criterion 2: fusion-weight endpoints select each input; the averaging
// attention equals an independent averaging implementation.
void criterion_eq1_identities() {
    Tensor f_up = random_tensor({2, 3, 6, 8}, 101);
    Tensor f_low = random_tensor({2, 3, 6, 8}, 102);
    Tensor ones = Tensor::full({2, 1, 6, 8}, 1.0f);
    Tensor zeros = Tensor::zeros({2, 1, 6, 8});
    double up_err = max_abs_diff(uafm_blend(f_up, f_low, ones), f_up);
    double low_err = max_abs_diff(uafm_blend(f_up, f_low, zeros), f_low);

    // AttentionKind::None against a from-scratch upsample-and-average loop
    Rng rng(7);
    UafmBlock block = UafmBlock::create(3, 3, 3, AttentionKind::None, false, rng);
    Tensor f_high = random_tensor({1, 3, 3, 4}, 103);
    Tensor skip = random_tensor({1, 3, 6, 8}, 104);
    Tensor got = block.forward(f_high, skip, false);
    ref::RefTensor up = ref::bilinear_upsample(ref::from_tensor(f_high), 6, 8);
    double avg_err = 0.0;
    for (std::int64_t i = 0; i < got.numel(); ++i) {
        double want = 0.5 * (up.data[static_cast<std::size_t>(i)] + skip.data()[i]);
        avg_err = std::max(avg_err, std::abs(got.data()[i] - want));
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "alpha=1 err %.1e, alpha=0 err %.1e (<=1e-7); averaging err %.1e (<=1e-6)",
                  up_err, low_err, avg_err);
    report("eq1-identities", up_err <= 1e-7 && low_err <= 1e-7 && avg_err <= 1e-6, buf);
}

// Criterion 3: Table-1 configs at 512x1024 produce the published shapes,
// exactly.
void criterion_shape_suite() {
    bool ok = true;
    std::string details;
    NoGradGuard guard;
    struct Want {
        const char* preset;
        std::array<int, 3> decoder;
    };
    for (const Want& want : {Want{"ppliteseg-t", {32, 64, 128}}, Want{"ppliteseg-b", {64, 96, 128}}}) {
        PPLiteSeg model(ModelConfig::preset(want.preset), 1);
        Tensor image = random_tensor({1, 3, 512, 1024}, 105, 0.0f, 1.0f);

        FeaturePyramid fp = model.encoder().forward(image, false);
        ok &= shape_eq(fp.f2.shape(), {1, 32, 256, 512});
        ok &= shape_eq(fp.f4.shape(), {1, 64, 128, 256});
        ok &= shape_eq(fp.f8.shape(), {1, 256, 64, 128});
        ok &= shape_eq(fp.f16.shape(), {1, 512, 32, 64});
        ok &= shape_eq(fp.f32.shape(), {1, 1024, 16, 32});

        Tensor context = model.sppm()->forward(fp.f32, false);
        ok &= shape_eq(context.shape(), {1, 128, 16, 32});
        Tensor fused1 = model.fuse_high().forward(context, fp.f16, false);
        ok &= shape_eq(fused1.shape(), {1, want.decoder[1], 32, 64});
        Tensor fused2 = model.fuse_low().forward(fused1, fp.f8, false);
        ok &= shape_eq(fused2.shape(), {1, want.decoder[0], 64, 128});  // stride 1/8
        Tensor logits = model.head().forward(fused2, 512, 1024, false);
        ok &= shape_eq(logits.shape(), {1, 19, 512, 1024});
        details += std::string(want.preset) + " 128->" + std::to_string(want.decoder[1]) + "->" +
                   std::to_string(want.decoder[0]) + " logits 19x512x1024; ";
        if (!ok) break;
    }
    report("shape-suite", ok, details + (ok ? "all exact" : "shape mismatch"));
}

// Criterion 4: production kernels match the naive-loop oracles.
void criterion_oracle_equivalence() {
    bool ok = true;
    std::string worst_op;
    double worst = 0.0;
    auto track = [&](const char* name, double err, double tol) {
        if (err > worst) {
            worst = err;
            worst_op = name;
        }
        ok &= err <= tol;
    };

    Tensor x = random_tensor({2, 3, 8, 8}, 201);
    Tensor w = random_tensor({4, 3, 3, 3}, 202);
    Tensor b = random_tensor({4}, 203);
    track("conv2d", ref::max_abs_diff(conv2d(x, w, b, 1, 1),
                                      ref::conv2d(ref::from_tensor(x), ref::from_tensor(w),
                                                  ref::from_tensor(b), 1, 1)),
          1e-6);
    track("adaptive_avg_pool",
          ref::max_abs_diff(adaptive_avg_pool(x, 3, 4),
                            ref::adaptive_avg_pool(ref::from_tensor(x), 3, 4)),
          1e-6);
    track("bilinear_upsample", ref::max_abs_diff(bilinear_upsample(x, 13, 19),
                                                 ref::bilinear_upsample(ref::from_tensor(x), 13, 19)),
          1e-6);
    auto [cm_got, cx_got] = channel_mean_max(x);
    auto [cm_want, cx_want] = ref::channel_mean_max(ref::from_tensor(x));
    track("channel_mean", ref::max_abs_diff(cm_got, cm_want), 1e-6);
    track("channel_max", ref::max_abs_diff(cx_got, cx_want), 0.0);
    auto [sa_got, sx_got] = spatial_avg_max_pool(x);
    auto [sa_want, sx_want] = ref::spatial_avg_max_pool(ref::from_tensor(x));
    track("spatial_avg", ref::max_abs_diff(sa_got, sa_want), 1e-6);
    track("spatial_max", ref::max_abs_diff(sx_got, sx_want), 0.0);

    Tensor logits = random_tensor({2, 5, 8, 8}, 204);
    LabelMap am_got = argmax_labels(logits);
    LabelMap am_want = ref::argmax_labels(ref::from_tensor(logits));
    bool argmax_exact = am_got.values == am_want.values;
    ok &= argmax_exact;

    // confusion accumulation vs a direct counting loop
    std::mt19937 rng(205);
    LabelMap pred(2, 8, 8), gt(2, 8, 8);
    for (auto& v : pred.values) v = static_cast<std::uint8_t>(rng() % 5);
    for (auto& v : gt.values) v = static_cast<std::uint8_t>(rng() % 6);
    for (auto& v : gt.values) {
        if (v == 5) v = kIgnoreLabel;
    }
    ConfusionMatrix cm(5);
    cm.accumulate(pred, gt);
    bool cm_exact = true;
    std::uint64_t counts[5][5] = {};
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        if (gt.values[i] == kIgnoreLabel) continue;
        ++counts[gt.values[i]][pred.values[i]];
    }
    for (int g = 0; g < 5; ++g) {
        for (int p = 0; p < 5; ++p) cm_exact &= cm.at(g, p) == counts[g][p];
    }
    ok &= cm_exact;

    char buf[160];
    std::snprintf(buf, sizeof(buf), "worst float op %s err %.2e (<=1e-6); argmax %s, confusion %s",
                  worst_op.c_str(), worst, argmax_exact ? "exact" : "MISMATCH",
                  cm_exact ? "exact" : "MISMATCH");
    report("oracle-equivalence", ok, buf);
}

// Criterion 5: mining-disabled OHEM equals plain mean CE on 20 seeded batches.
void criterion_ohem_degenerate() {
    double worst = 0.0;
    for (std::uint32_t trial = 0; trial < 20; ++trial) {
        Tensor logits = random_tensor({2, 4, 6, 6}, 300 + trial, -2.5f, 2.5f);
        std::mt19937 rng(400 + trial);
        LabelMap labels(2, 6, 6);
        for (auto& v : labels.values) v = static_cast<std::uint8_t>(rng() % 4);
        labels.values[rng() % labels.values.size()] = kIgnoreLabel;

        OhemConfig cfg;
        cfg.prob_threshold = 1.0f;
        cfg.min_kept = 72;
        Tensor mined = ohem_cross_entropy(logits, labels, cfg);

        // plain mean CE in double precision
        ref::RefTensor lr = ref::from_tensor(logits);
        double total = 0.0;
        int count = 0;
        for (int ni = 0; ni < 2; ++ni) {
            for (int i = 0; i < 36; ++i) {
                std::uint8_t y = labels.values[static_cast<std::size_t>(ni * 36 + i)];
                if (y == kIgnoreLabel) continue;
                double maxv = -1e30, denom = 0.0;
                for (int c = 0; c < 4; ++c) {
                    maxv = std::max(maxv, lr.data[static_cast<std::size_t>((ni * 4 + c) * 36 + i)]);
                }
                for (int c = 0; c < 4; ++c) {
                    denom += std::exp(lr.data[static_cast<std::size_t>((ni * 4 + c) * 36 + i)] - maxv);
                }
                total += -(lr.data[static_cast<std::size_t>((ni * 4 + y) * 36 + i)] - maxv -
                           std::log(denom));
                ++count;
            }
        }
        worst = std::max(worst, std::abs(mined.data()[0] - total / count));
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "20 batches, worst |ohem - mean CE| = %.2e (<=1e-6)", worst);
    report("ohem-degenerate", worst <= 1e-6, buf);
}

// Criterion 6: desk-scale training converges and generalizes within budget.
void criterion_desk_training() {
    auto start = std::chrono::steady_clock::now();
    TrainConfig cfg;
    cfg.model = ModelConfig::preset("tiny");
    cfg.seed = 0;
    cfg.iters = 500;
    cfg.batch_size = 8;
    cfg.base_lr = 0.02f;
    cfg.dataset.type = "synthetic";
    cfg.dataset.seed = 0;
    cfg.dataset.num_samples = 200;

    PPLiteSeg model(cfg.model, cfg.seed);
    auto dataset = cfg.dataset.open();
    TrainResult result = train(model, *dataset, cfg);

    double initial = 0.0, final = 0.0;
    for (int i = 0; i < 50; ++i) initial += result.curve[static_cast<std::size_t>(i)].loss;
    for (int i = 450; i < 500; ++i) final += result.curve[static_cast<std::size_t>(i)].loss;
    initial /= 50.0;
    final /= 50.0;

    // held-out samples: indices past the training range of the same generator
    SyntheticShapesDataset heldout(0, 232);
    EvalResult eval = evaluate(model, heldout, 200, 32, cfg.augment);
    double elapsed = seconds_since(start);

    bool pass = final < 0.5 * initial && eval.iou.mean >= 0.70 && elapsed < 900.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "loss %.3f -> %.3f (ratio %.2f, need <0.5); held-out mIoU %.3f (need >=0.70); "
                  "%.0f s (limit 900 s)",
                  initial, final, final / initial, eval.iou.mean, elapsed);
    report("desk-training", pass, buf);
}

// Criterion 7: the four module combinations build, train briefly, and have
// distinct parameter counts.
void criterion_ablation_structure() {
    std::vector<std::int64_t> counts;
    bool trained_ok = true;
    for (bool use_sppm : {true, false}) {
        for (AttentionKind kind : {AttentionKind::Spatial, AttentionKind::None}) {
            TrainConfig cfg;
            cfg.model = ModelConfig::preset("tiny");
            cfg.model.use_sppm = use_sppm;
            cfg.model.attention = kind;
            cfg.seed = 5;
            cfg.iters = 100;
            cfg.batch_size = 4;
            cfg.base_lr = 0.02f;
            cfg.dataset.type = "synthetic";
            cfg.dataset.seed = 5;
            cfg.dataset.num_samples = 64;
            try {
                PPLiteSeg model(cfg.model, cfg.seed);
                counts.push_back(model.num_parameters());
                auto dataset = cfg.dataset.open();
                train(model, *dataset, cfg);
            } catch (const std::exception& e) {
                trained_ok = false;
            }
        }
    }
    std::vector<std::int64_t> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "params {+sppm+attn %lld, +sppm-attn %lld, -sppm+attn %lld, -sppm-attn %lld}, "
                  "100 iters each%s",
                  static_cast<long long>(counts.size() > 0 ? counts[0] : -1),
                  static_cast<long long>(counts.size() > 1 ? counts[1] : -1),
                  static_cast<long long>(counts.size() > 2 ? counts[2] : -1),
                  static_cast<long long>(counts.size() > 3 ? counts[3] : -1),
                  trained_ok ? "" : " (TRAINING FAILED)");
    report("ablation-structure", trained_ok && distinct && counts.size() == 4, buf);
}

// Criterion 8: the lighter variant is faster at equal resolution and FPS does
// not increase with input area.
void criterion_bench_ordering() {
    PPLiteSeg t(ModelConfig::preset("ppliteseg-t"), 1);
    PPLiteSeg b(ModelConfig::preset("ppliteseg-b"), 1);
    BenchReport t_small = run_bench(t, 256, 512, 1, 3);
    BenchReport b_small = run_bench(b, 256, 512, 1, 3);
    BenchReport t_large = run_bench(t, 512, 1024, 1, 3);
    bool ordering = t_small.fps > b_small.fps;
    bool monotone = t_large.fps <= t_small.fps;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "T %.2f FPS vs B %.2f FPS at 256x512 (T>B); T %.2f FPS at 512x1024 "
                  "(nonincreasing in area)",
                  t_small.fps, b_small.fps, t_large.fps);
    report("bench-ordering", ordering && monotone, buf);
}

// Criterion 9: bitwise reproducible training, bit-exact checkpoints, and
// cross-config rejection.
void criterion_determinism_serialization() {
    TrainConfig cfg;
    cfg.model = ModelConfig::preset("tiny");
    cfg.seed = 9;
    cfg.iters = 30;
    cfg.batch_size = 4;
    cfg.base_lr = 0.02f;
    cfg.dataset.type = "synthetic";
    cfg.dataset.seed = 9;
    cfg.dataset.num_samples = 32;

    auto run = [&cfg]() {
        PPLiteSeg model(cfg.model, cfg.seed);
        auto dataset = cfg.dataset.open();
        TrainResult result = train(model, *dataset, cfg);
        std::vector<float> flat;
        for (const ParamRef& p : model.named_parameters()) {
            flat.insert(flat.end(), p.tensor.vec().begin(), p.tensor.vec().end());
        }
        return std::pair{result.curve, flat};
    };
    auto [curve_a, params_a] = run();
    auto [curve_b, params_b] = run();
    bool reproducible = params_a == params_b && curve_a.size() == curve_b.size();
    for (std::size_t i = 0; reproducible && i < curve_a.size(); ++i) {
        reproducible = curve_a[i].loss == curve_b[i].loss;
    }

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "liteseg_acceptance";
    fs::create_directories(dir);
    PPLiteSeg model(cfg.model, 77);
    const std::string path = (dir / "round.ppls").string();
    save_checkpoint(model, path);
    PPLiteSeg loaded = load_checkpoint(path);
    bool round_trip = true;
    auto pa = model.named_parameters();
    auto pb = loaded.named_parameters();
    round_trip &= pa.size() == pb.size();
    for (std::size_t i = 0; round_trip && i < pa.size(); ++i) {
        round_trip = pa[i].name == pb[i].name && pa[i].tensor.vec() == pb[i].tensor.vec();
    }

    // a T-config checkpoint must refuse to load into the B model
    bool rejected = false;
    {
        PPLiteSeg t(ModelConfig::preset("ppliteseg-t"), 1);
        PPLiteSeg b(ModelConfig::preset("ppliteseg-b"), 1);
        const std::string tpath = (dir / "t.ppls").string();
        save_checkpoint(t, tpath);
        try {
            load_checkpoint_into(b, tpath);
        } catch (const CheckpointError&) {
            rejected = true;
        }
    }
    fs::remove_all(dir);

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "two runs bitwise %s; checkpoint round trip %s; cross-config load %s",
                  reproducible ? "equal" : "DIFFER", round_trip ? "bit-exact" : "BROKEN",
                  rejected ? "rejected" : "ACCEPTED (bad)");
    report("determinism-serialization", reproducible && round_trip && rejected, buf);
}

}  // namespace

int main() {
    auto start = std::chrono::steady_clock::now();
    criterion_gradient_suite();
    criterion_eq1_identities();
    criterion_shape_suite();
    criterion_oracle_equivalence();
    criterion_ohem_degenerate();
    criterion_desk_training();
    criterion_ablation_structure();
    criterion_bench_ordering();
    criterion_determinism_serialization();
    std::printf("%s: %d criterion(s) failed, total %.0f s\n", g_failures == 0 ? "OK" : "FAILED",
                g_failures, seconds_since(start));
    return g_failures == 0 ? 0 : 1;
}
