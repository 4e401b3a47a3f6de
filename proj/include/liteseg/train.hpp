#pragma once

#include <memory>

#include "liteseg/checkpoint.hpp"
#include "liteseg/dataset.hpp"
#include "liteseg/loss.hpp"
#include "liteseg/metrics.hpp"
#include "liteseg/optim.hpp"

namespace liteseg {

struct DatasetConfig {
    std::string type = "synthetic";  // "synthetic" | "manifest"
    // synthetic
    std::uint64_t seed = 0;
    int num_samples = 200;
    // manifest
    std::string manifest_path;
    int num_classes = 4;

    std::unique_ptr<Dataset> open() const;
};

struct TrainConfig {
    ModelConfig model = ModelConfig::preset("tiny");
    std::uint64_t seed = 0;
    std::int64_t iters = 500;
    int batch_size = 8;
    float base_lr = 0.02f;
    float momentum = 0.9f;
    float weight_decay = 5e-4f;
    float poly_power = 0.9f;
    std::int64_t warmup_iters = -1;  // -1: 1% of iters
    float warmup_start_factor = 0.1f;
    OhemConfig ohem;
    AugmentConfig augment;
    DatasetConfig dataset;
    std::string curve_csv;  // optional per-iteration CSV output

    ScheduleConfig schedule() const;
    void validate() const;

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
    static TrainConfig from_json_file(const std::string& path);
};

struct LossPoint {
    std::int64_t iter;
    float lr;
    float loss;
};

struct TrainResult {
    std::vector<LossPoint> curve;
};

// Runs forward -> OHEM loss -> backward -> SGD with the poly schedule. Batches
// and augmentation derive from (seed, iter, slot), so runs are bitwise
// reproducible. Aborts with NumericError naming the iteration if the loss
// goes non-finite.
TrainResult train(PPLiteSeg& model, const Dataset& dataset, const TrainConfig& cfg);

void write_loss_curve_csv(const std::string& path, const std::vector<LossPoint>& curve);

struct EvalResult {
    IouResult iou;
    ConfusionMatrix confusion;
};

// Eval-mode evaluation over dataset indices [first, first+count): normalize,
// forward, argmax, accumulate. Images must already match the model's size
// contract.
EvalResult evaluate(PPLiteSeg& model, const Dataset& dataset, int first, int count,
                    const AugmentConfig& normalize_cfg);

}  // namespace liteseg
