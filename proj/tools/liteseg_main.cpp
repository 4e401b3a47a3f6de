#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

#include "gradcheck.hpp"
#include "liteseg/bench.hpp"
#include "liteseg/checkpoint.hpp"
#include "liteseg/image_io.hpp"
#include "liteseg/train.hpp"

namespace {

using nlohmann::json;

struct SizeArg {
    int h = 0, w = 0;
    bool set = false;
};

SizeArg parse_size(const std::string& text) {
    SizeArg size;
    auto x = text.find('x');
    if (x == std::string::npos) x = text.find('X');
    if (x == std::string::npos) throw CLI::ValidationError("--size", "expected HxW, e.g. 512x1024");
    try {
        size.h = std::stoi(text.substr(0, x));
        size.w = std::stoi(text.substr(x + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("--size", "expected HxW, e.g. 512x1024");
    }
    if (size.h < 1 || size.w < 1) throw CLI::ValidationError("--size", "must be positive");
    size.set = true;
    return size;
}

void emit_report(bool json_mode, const std::string& command, const json& config,
                 const json& metrics, const json& timings) {
    if (!json_mode) return;
    json report;
    report["command"] = command;
    report["config"] = config;
    report["metrics"] = metrics;
    report["timings"] = timings;
    std::cout << report.dump(2) << std::endl;
}

int cmd_train(const std::string& config_path, const std::string& out_path, long long seed_override,
              const std::string& curve_path, bool json_mode) {
    liteseg::TrainConfig cfg = liteseg::TrainConfig::from_json_file(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (!curve_path.empty()) cfg.curve_csv = curve_path;

    auto dataset = cfg.dataset.open();
    liteseg::PPLiteSeg model(cfg.model, cfg.seed);
    if (!json_mode) {
        std::printf("training %s for %lld iterations, batch %d, %lld parameters\n",
                    cfg.model.encoder.c_str(), static_cast<long long>(cfg.iters), cfg.batch_size,
                    static_cast<long long>(model.num_parameters()));
    }
    liteseg::TrainResult result = liteseg::train(model, *dataset, cfg);
    liteseg::save_checkpoint(model, out_path);

    json metrics;
    if (!result.curve.empty()) {
        metrics["first_loss"] = result.curve.front().loss;
        metrics["final_loss"] = result.curve.back().loss;
    }
    metrics["iterations"] = cfg.iters;
    metrics["parameters"] = model.num_parameters();
    metrics["checkpoint"] = out_path;
    if (!json_mode) {
        if (!result.curve.empty()) {
            std::printf("loss %.4f -> %.4f\n", result.curve.front().loss,
                        result.curve.back().loss);
        }
        std::printf("checkpoint written to %s\n", out_path.c_str());
    }
    emit_report(json_mode, "train", json::parse(cfg.to_json()), metrics, json::array());
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image_path, const std::string& out_path,
              bool palette, bool json_mode) {
    liteseg::PPLiteSeg model = liteseg::load_checkpoint(ckpt);
    liteseg::Image img = liteseg::read_image(image_path);
    liteseg::Sample sample;
    sample.image = liteseg::image_to_tensor(img);
    sample.label = liteseg::LabelMap(1, img.h, img.w);
    liteseg::AugmentConfig norm;
    sample = liteseg::normalize_sample(sample, norm);
    liteseg::Tensor input =
        liteseg::Tensor::from_vector({1, 3, img.h, img.w}, sample.image.vec());
    liteseg::LabelMap mask = model.predict(input);
    liteseg::write_image(out_path,
                         palette ? liteseg::labels_to_palette_image(mask)
                                 : liteseg::labels_to_image(mask));
    if (!json_mode) {
        std::printf("wrote %s (%dx%d, %d classes)\n", out_path.c_str(), img.w, img.h,
                    model.config().num_classes);
    }
    json config{{"checkpoint", ckpt}, {"image", image_path}, {"palette", palette}};
    json metrics{{"mask", out_path},
                 {"height", img.h},
                 {"width", img.w},
                 {"num_classes", model.config().num_classes}};
    emit_report(json_mode, "infer", config, metrics, json::array());
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, const SizeArg& size,
             bool json_mode) {
    liteseg::PPLiteSeg model = liteseg::load_checkpoint(ckpt);
    liteseg::ManifestDataset dataset(manifest, model.config().num_classes);
    liteseg::AugmentConfig norm;
    liteseg::ConfusionMatrix cm(dataset.num_classes());
    liteseg::NoGradGuard guard;
    for (int i = 0; i < dataset.size(); ++i) {
        liteseg::Sample raw = dataset.get(i);
        liteseg::Sample s = liteseg::normalize_sample(raw, norm);
        liteseg::Tensor image = s.image;
        if (size.set) image = liteseg::resize_image_bilinear(image, size.h, size.w);
        liteseg::Tensor batch = liteseg::Tensor::from_vector(
            {1, 3, image.dim(1), image.dim(2)}, image.vec());
        liteseg::LabelMap pred = model.predict(batch);
        if (pred.h != raw.label.h || pred.w != raw.label.w) {
            pred = liteseg::resize_labels_nearest(pred, raw.label.h, raw.label.w);
        }
        cm.accumulate(pred, raw.label);
    }
    liteseg::IouResult iou = liteseg::miou(cm);
    json per_class = json::array();
    for (std::size_t c = 0; c < iou.per_class.size(); ++c) {
        if (iou.per_class[c] < 0.0) {
            if (!json_mode) std::printf("class %2zu IoU: (no pixels)\n", c);
            per_class.push_back(nullptr);
        } else {
            if (!json_mode) std::printf("class %2zu IoU: %.4f\n", c, iou.per_class[c]);
            per_class.push_back(iou.per_class[c]);
        }
    }
    if (!json_mode) std::printf("mIoU: %.4f over %d images\n", iou.mean, dataset.size());
    json config{{"checkpoint", ckpt}, {"manifest", manifest}};
    if (size.set) config["size"] = {size.h, size.w};
    json metrics{{"miou", iou.mean}, {"per_class_iou", per_class}, {"images", dataset.size()}};
    emit_report(json_mode, "eval", config, metrics, json::array());
    return 0;
}

int cmd_bench(const std::string& ckpt, const SizeArg& size, int runs, int warmup, bool no_resize,
              bool json_mode) {
    liteseg::PPLiteSeg model = liteseg::load_checkpoint(ckpt);
    liteseg::BenchReport report =
        liteseg::run_bench(model, size.h, size.w, warmup, runs, !no_resize);
    if (!json_mode) {
        std::printf("resolution %dx%d (original %dx%d), %d warmup + %d timed runs%s\n",
                    report.res_h, report.res_w, report.orig_h, report.orig_w, report.warmup_runs,
                    report.timed_runs, report.includes_resize ? "" : " (resize excluded)");
        std::printf("latency ms: mean %.2f, min %.2f, max %.2f\n", report.mean_ms, report.min_ms,
                    report.max_ms);
        std::printf("FPS: %.2f\n", report.fps);
    }
    json config{{"checkpoint", ckpt},
                {"size", {size.h, size.w}},
                {"runs", runs},
                {"warmup", warmup},
                {"includes_resize", report.includes_resize}};
    json metrics{{"mean_ms", report.mean_ms},
                 {"min_ms", report.min_ms},
                 {"max_ms", report.max_ms},
                 {"fps", report.fps},
                 {"resolution", {report.res_h, report.res_w}}};
    emit_report(json_mode, "bench", config, metrics, json(report.run_ms));
    return 0;
}

int cmd_gradcheck(long long seed, bool json_mode) {
    auto results = liteseg::check::run_gradcheck_suite(static_cast<std::uint64_t>(seed),
                                                       /*verbose=*/!json_mode);
    bool ok = liteseg::check::all_passed(results);
    json metrics;
    json checks = json::array();
    double worst = 0.0;
    for (const auto& r : results) {
        checks.push_back({{"name", r.name},
                          {"pass", r.pass},
                          {"max_rel_err", r.max_rel_err},
                          {"note", r.note}});
        worst = std::max(worst, r.max_rel_err);
    }
    metrics["checks"] = checks;
    metrics["worst_rel_err"] = worst;
    metrics["passed"] = ok;
    if (!json_mode) {
        std::printf("%zu checks, worst relative error %.3e: %s\n", results.size(), worst,
                    ok ? "PASS" : "FAIL");
    }
    emit_report(json_mode, "gradcheck", json{{"seed", seed}}, metrics, json::array());
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PP-LiteSeg real-time semantic segmentation engine"};
    app.require_subcommand(1);
    app.fallthrough(true);
    bool json_mode = false;
    app.add_flag("--json", json_mode, "emit a machine-readable JSON report on stdout");

    auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
    std::string train_config, train_out, train_curve;
    long long train_seed = -1;
    train_cmd->add_option("--config", train_config, "training config JSON")->required();
    train_cmd->add_option("--out", train_out, "output checkpoint path")->required();
    train_cmd->add_option("--seed", train_seed, "override the config seed");
    train_cmd->add_option("--curve", train_curve, "write per-iteration loss CSV here");

    auto* infer_cmd = app.add_subcommand("infer", "segment one image");
    std::string infer_ckpt, infer_image, infer_out;
    bool infer_palette = false;
    infer_cmd->add_option("--ckpt", infer_ckpt, "checkpoint path")->required();
    infer_cmd->add_option("--image", infer_image, "input image (PNG/PPM/PGM)")->required();
    infer_cmd->add_option("--out", infer_out, "output mask path")->required();
    infer_cmd->add_flag("--palette", infer_palette, "write a colorized mask instead of class ids");

    auto* eval_cmd = app.add_subcommand("eval", "mIoU over a manifest of image/label pairs");
    std::string eval_ckpt, eval_manifest, eval_size;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "image_path<TAB>label_path per line")
        ->required();
    eval_cmd->add_option("--size", eval_size, "inference size HxW (predictions resized back)");

    auto* bench_cmd = app.add_subcommand("bench", "inference latency / FPS");
    std::string bench_ckpt, bench_size;
    int bench_runs = 50, bench_warmup = 10;
    bool bench_no_resize = false;
    bench_cmd->add_option("--ckpt", bench_ckpt, "checkpoint path")->required();
    bench_cmd->add_option("--size", bench_size, "inference size HxW")->required();
    bench_cmd->add_option("--runs", bench_runs, "timed runs (>= 3)");
    bench_cmd->add_option("--warmup", bench_warmup, "warmup runs (>= 1)");
    bench_cmd->add_flag("--no-resize", bench_no_resize, "time inference only");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    long long grad_seed = 42;
    grad_cmd->add_option("--seed", grad_seed, "base seed for the random draws");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*train_cmd) return cmd_train(train_config, train_out, train_seed, train_curve, json_mode);
        if (*infer_cmd) return cmd_infer(infer_ckpt, infer_image, infer_out, infer_palette, json_mode);
        if (*eval_cmd) {
            SizeArg size;
            if (!eval_size.empty()) size = parse_size(eval_size);
            return cmd_eval(eval_ckpt, eval_manifest, size, json_mode);
        }
        if (*bench_cmd) {
            return cmd_bench(bench_ckpt, parse_size(bench_size), bench_runs, bench_warmup,
                             bench_no_resize, json_mode);
        }
        if (*grad_cmd) return cmd_gradcheck(grad_seed, json_mode);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
