#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "liteseg/train.hpp"

using namespace liteseg;

namespace {

TrainConfig quick_config(std::int64_t iters) {
    TrainConfig cfg;
    cfg.model = ModelConfig::preset("tiny");
    cfg.seed = 11;
    cfg.iters = iters;
    cfg.batch_size = 2;
    cfg.base_lr = 0.02f;
    cfg.dataset.type = "synthetic";
    cfg.dataset.seed = 11;
    cfg.dataset.num_samples = 8;
    return cfg;
}

std::vector<float> flatten_params(const PPLiteSeg& model) {
    std::vector<float> out;
    for (const ParamRef& p : model.named_parameters()) {
        out.insert(out.end(), p.tensor.vec().begin(), p.tensor.vec().end());
    }
    return out;
}

}  // namespace

TEST_CASE("train: zero iterations leave the model bitwise untouched") {
    TrainConfig cfg = quick_config(0);
    PPLiteSeg model(cfg.model, cfg.seed);
    std::vector<float> before = flatten_params(model);
    auto ds = cfg.dataset.open();
    TrainResult result = train(model, *ds, cfg);
    CHECK(result.curve.empty());
    CHECK(flatten_params(model) == before);
}

TEST_CASE("train: fixed seeds reproduce the loss curve and weights bitwise") {
    TrainConfig cfg = quick_config(6);
    auto run = [&cfg]() {
        PPLiteSeg model(cfg.model, cfg.seed);
        auto ds = cfg.dataset.open();
        TrainResult result = train(model, *ds, cfg);
        return std::pair{result.curve, flatten_params(model)};
    };
    auto [curve_a, params_a] = run();
    auto [curve_b, params_b] = run();
    REQUIRE(curve_a.size() == curve_b.size());
    for (std::size_t i = 0; i < curve_a.size(); ++i) {
        CHECK(curve_a[i].loss == curve_b[i].loss);
        CHECK(curve_a[i].lr == curve_b[i].lr);
    }
    CHECK(params_a == params_b);
}

TEST_CASE("train: one small step on a frozen batch strictly decreases the loss") {
    TrainConfig cfg = quick_config(1);
    PPLiteSeg model(cfg.model, 21);
    SyntheticShapesDataset ds(21, 4);
    std::vector<Sample> batch;
    for (int i = 0; i < 4; ++i) {
        std::mt19937 rng = derive_rng(21, static_cast<std::uint64_t>(i));
        batch.push_back(augment(ds.get(i), cfg.augment, rng));
    }
    auto [images, labels] = stack_samples(batch);

    SgdOptimizer opt(model.named_parameters(), 0.9f, 0.0f);
    Tensor loss0 = ohem_cross_entropy(model.forward(images, true), labels, cfg.ohem);
    opt.zero_grad();
    backward(loss0);
    opt.step(1e-4f);
    Tensor loss1 = ohem_cross_entropy(model.forward(images, true), labels, cfg.ohem);
    CHECK(loss1.data()[0] < loss0.data()[0]);
}

TEST_CASE("train: a non-finite loss aborts naming the iteration") {
    TrainConfig cfg = quick_config(3);
    PPLiteSeg model(cfg.model, cfg.seed);
    auto params = model.named_parameters();
    params.front().tensor.vec()[0] = std::numeric_limits<float>::quiet_NaN();
    auto ds = cfg.dataset.open();
    CHECK_THROWS_WITH_AS(train(model, *ds, cfg), doctest::Contains("iteration 0"), NumericError);
}

TEST_CASE("train: the loss curve CSV is written when requested") {
    TrainConfig cfg = quick_config(3);
    cfg.curve_csv =
        (std::filesystem::temp_directory_path() / "liteseg_curve_test.csv").string();
    PPLiteSeg model(cfg.model, cfg.seed);
    auto ds = cfg.dataset.open();
    train(model, *ds, cfg);
    std::ifstream in(cfg.curve_csv);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "iter,lr,loss");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) rows += !line.empty();
    CHECK(rows == 3);
    std::filesystem::remove(cfg.curve_csv);
}

TEST_CASE("train config: JSON round trip") {
    TrainConfig cfg = quick_config(10);
    cfg.ohem.prob_threshold = 0.6f;
    cfg.augment.jitter = 0.25f;
    TrainConfig back = TrainConfig::from_json(cfg.to_json());
    CHECK(back.model == cfg.model);
    CHECK(back.iters == cfg.iters);
    CHECK(back.batch_size == cfg.batch_size);
    CHECK(back.ohem.prob_threshold == doctest::Approx(0.6f));
    CHECK(back.augment.jitter == doctest::Approx(0.25f));
    CHECK(back.dataset.num_samples == cfg.dataset.num_samples);
    CHECK_THROWS_AS(TrainConfig::from_json("{\"iters\": -3}"), ConfigError);
}

TEST_CASE("evaluate: a model scored against its own predictions is perfect") {
    // Construct ground truth from the model itself via a wrapper dataset.
    class SelfLabeled : public Dataset {
      public:
        SelfLabeled(PPLiteSeg& model, const SyntheticShapesDataset& base, const AugmentConfig& cfg)
            : model_(model), base_(base), cfg_(cfg) {}
        int size() const override { return base_.size(); }
        int num_classes() const override { return base_.num_classes(); }
        Sample get(int index) const override {
            Sample s = base_.get(index);
            Sample n = normalize_sample(s, cfg_);
            Tensor image = Tensor::from_vector({1, 3, 64, 128}, n.image.vec());
            s.label = model_.predict(image);
            return s;
        }

      private:
        PPLiteSeg& model_;
        const SyntheticShapesDataset& base_;
        const AugmentConfig& cfg_;
    };

    PPLiteSeg model(ModelConfig::preset("tiny"), 31);
    SyntheticShapesDataset base(31, 2);
    AugmentConfig norm;
    SelfLabeled ds(model, base, norm);
    EvalResult result = evaluate(model, ds, 0, 2, norm);
    CHECK(result.iou.mean == doctest::Approx(1.0));
}
