#include "liteseg/train.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "liteseg/parallel.hpp"

namespace liteseg {

std::unique_ptr<Dataset> DatasetConfig::open() const {
    if (type == "synthetic") {
        return std::make_unique<SyntheticShapesDataset>(seed, num_samples);
    }
    if (type == "manifest") {
        return std::make_unique<ManifestDataset>(manifest_path, num_classes);
    }
    throw ConfigError("unknown dataset type '" + type + "'");
}

ScheduleConfig TrainConfig::schedule() const {
    ScheduleConfig s;
    s.base_lr = base_lr;
    s.max_iters = iters > 0 ? iters : 1;
    s.power = poly_power;
    s.warmup_iters = warmup_iters >= 0 ? warmup_iters : iters / 100;
    if (s.warmup_iters >= s.max_iters) s.warmup_iters = 0;
    s.warmup_start_factor = warmup_start_factor;
    return s;
}

void TrainConfig::validate() const {
    model.validate();
    if (iters < 0) throw ConfigError("train iters must be >= 0");
    if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
    if (iters > 0) schedule().validate();
    augment.validate();
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["model"] = nlohmann::json::parse(model.to_json());
    j["seed"] = seed;
    j["iters"] = iters;
    j["batch_size"] = batch_size;
    j["optimizer"] = {{"base_lr", base_lr}, {"momentum", momentum}, {"weight_decay", weight_decay}};
    j["schedule"] = {{"power", poly_power},
                     {"warmup_iters", warmup_iters},
                     {"warmup_start_factor", warmup_start_factor}};
    j["ohem"] = {{"prob_threshold", ohem.prob_threshold}, {"min_kept", ohem.min_kept}};
    j["augment"] = {{"scale_range", augment.scale_range},
                    {"crop", {augment.crop_h, augment.crop_w}},
                    {"hflip_prob", augment.hflip_prob},
                    {"jitter", augment.jitter},
                    {"mean", augment.mean},
                    {"std", augment.std}};
    j["dataset"] = {{"type", dataset.type},
                    {"seed", dataset.seed},
                    {"num_samples", dataset.num_samples},
                    {"manifest_path", dataset.manifest_path},
                    {"num_classes", dataset.num_classes}};
    if (!curve_csv.empty()) j["curve_csv"] = curve_csv;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid training config JSON: ") + e.what());
    }
    TrainConfig cfg;
    try {
        if (j.contains("model")) cfg.model = ModelConfig::from_json(j.at("model").dump());
        cfg.seed = j.value("seed", cfg.seed);
        cfg.iters = j.value("iters", cfg.iters);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            cfg.base_lr = o.value("base_lr", cfg.base_lr);
            cfg.momentum = o.value("momentum", cfg.momentum);
            cfg.weight_decay = o.value("weight_decay", cfg.weight_decay);
        }
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            cfg.poly_power = s.value("power", cfg.poly_power);
            cfg.warmup_iters = s.value("warmup_iters", cfg.warmup_iters);
            cfg.warmup_start_factor = s.value("warmup_start_factor", cfg.warmup_start_factor);
        }
        if (j.contains("ohem")) {
            const auto& o = j.at("ohem");
            cfg.ohem.prob_threshold = o.value("prob_threshold", cfg.ohem.prob_threshold);
            cfg.ohem.min_kept = o.value("min_kept", cfg.ohem.min_kept);
        }
        if (j.contains("augment")) {
            const auto& a = j.at("augment");
            if (a.contains("scale_range")) {
                auto v = a.at("scale_range").get<std::vector<float>>();
                if (v.size() != 2) throw ConfigError("augment scale_range must have 2 entries");
                cfg.augment.scale_range = {v[0], v[1]};
            }
            if (a.contains("crop")) {
                auto v = a.at("crop").get<std::vector<int>>();
                if (v.size() != 2) throw ConfigError("augment crop must be [H, W]");
                cfg.augment.crop_h = v[0];
                cfg.augment.crop_w = v[1];
            }
            cfg.augment.hflip_prob = a.value("hflip_prob", cfg.augment.hflip_prob);
            cfg.augment.jitter = a.value("jitter", cfg.augment.jitter);
            if (a.contains("mean")) {
                auto v = a.at("mean").get<std::vector<float>>();
                if (v.size() != 3) throw ConfigError("augment mean must have 3 entries");
                std::copy(v.begin(), v.end(), cfg.augment.mean.begin());
            }
            if (a.contains("std")) {
                auto v = a.at("std").get<std::vector<float>>();
                if (v.size() != 3) throw ConfigError("augment std must have 3 entries");
                std::copy(v.begin(), v.end(), cfg.augment.std.begin());
            }
        }
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            cfg.dataset.type = d.value("type", cfg.dataset.type);
            cfg.dataset.seed = d.value("seed", cfg.dataset.seed);
            cfg.dataset.num_samples = d.value("num_samples", cfg.dataset.num_samples);
            cfg.dataset.manifest_path = d.value("manifest_path", cfg.dataset.manifest_path);
            cfg.dataset.num_classes = d.value("num_classes", cfg.dataset.num_classes);
        }
        cfg.curve_csv = j.value("curve_csv", cfg.curve_csv);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid training config field: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open training config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

TrainResult train(PPLiteSeg& model, const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    TrainResult result;
    if (cfg.iters == 0) return result;

    ScheduleConfig sched = cfg.schedule();
    SgdOptimizer optimizer(model.named_parameters(), cfg.momentum, cfg.weight_decay);
    const int n_samples = dataset.size();

    for (std::int64_t iter = 0; iter < cfg.iters; ++iter) {
        // Batch slots draw sample indices and augmentation streams from
        // (seed, iter, slot); worker scheduling cannot change them.
        std::vector<Sample> batch(static_cast<std::size_t>(cfg.batch_size));
        parallel_for(cfg.batch_size, [&](std::int64_t slot) {
            std::mt19937 rng =
                derive_rng(cfg.seed, static_cast<std::uint64_t>(iter) * 0x10001ULL +
                                         static_cast<std::uint64_t>(slot) + 17);
            int index = std::uniform_int_distribution<int>(0, n_samples - 1)(rng);
            batch[static_cast<std::size_t>(slot)] = augment(dataset.get(index), cfg.augment, rng);
        });
        auto [images, labels] = stack_samples(batch);

        const float lr = poly_lr(iter, sched);
        Tensor logits = model.forward(images, /*training=*/true);
        Tensor loss = ohem_cross_entropy(logits, labels, cfg.ohem);
        const float loss_value = loss.data()[0];
        if (!std::isfinite(loss_value)) {
            throw NumericError("training loss is non-finite at iteration " + std::to_string(iter));
        }
        optimizer.zero_grad();
        backward(loss);
        optimizer.step(lr);
        result.curve.push_back({iter, lr, loss_value});
    }
    if (!cfg.curve_csv.empty()) write_loss_curve_csv(cfg.curve_csv, result.curve);
    return result;
}

void write_loss_curve_csv(const std::string& path, const std::vector<LossPoint>& curve) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write loss curve '" + path + "'");
    out << "iter,lr,loss\n";
    for (const LossPoint& p : curve) out << p.iter << ',' << p.lr << ',' << p.loss << '\n';
}

EvalResult evaluate(PPLiteSeg& model, const Dataset& dataset, int first, int count,
                    const AugmentConfig& normalize_cfg) {
    if (first < 0 || count < 1 || first + count > dataset.size()) {
        throw ConfigError("evaluate: index range out of bounds");
    }
    NoGradGuard guard;
    ConfusionMatrix cm(dataset.num_classes());
    for (int i = first; i < first + count; ++i) {
        Sample s = normalize_sample(dataset.get(i), normalize_cfg);
        Tensor image = Tensor::from_vector(
            {1, 3, s.image.dim(1), s.image.dim(2)}, s.image.vec());
        LabelMap pred = model.predict(image);
        cm.accumulate(pred, s.label);
    }
    return {miou(cm), cm};
}

}  // namespace liteseg
