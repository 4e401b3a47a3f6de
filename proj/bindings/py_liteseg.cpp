#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "liteseg/bench.hpp"
#include "liteseg/checkpoint.hpp"
#include "liteseg/metrics.hpp"
#include "liteseg/parallel.hpp"
#include "liteseg/train.hpp"

namespace py = pybind11;

namespace {

using liteseg::LabelMap;
using liteseg::Shape;
using liteseg::Tensor;

Tensor tensor_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    Shape shape(static_cast<std::size_t>(arr.ndim()));
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
        shape[static_cast<std::size_t>(i)] = static_cast<int>(arr.shape(i));
    }
    std::vector<float> data(arr.data(), arr.data() + arr.size());
    return Tensor::from_vector(std::move(shape), std::move(data));
}

py::array_t<float> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (int d : t.shape()) shape.push_back(d);
    py::array_t<float> arr(shape);
    std::copy(t.vec().begin(), t.vec().end(), arr.mutable_data());
    return arr;
}

py::array_t<std::uint8_t> array_from_labels(const LabelMap& labels) {
    py::array_t<std::uint8_t> arr({labels.n, labels.h, labels.w});
    std::copy(labels.values.begin(), labels.values.end(), arr.mutable_data());
    return arr;
}

LabelMap labels_from_array(
    const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3) throw liteseg::ShapeError("labels must be [N,H,W] uint8");
    LabelMap labels(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                    static_cast<int>(arr.shape(2)));
    std::copy(arr.data(), arr.data() + arr.size(), labels.values.begin());
    return labels;
}

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

}  // namespace

PYBIND11_MODULE(_liteseg, m) {
    m.doc() = "PP-LiteSeg real-time semantic segmentation engine";

    py::register_exception<liteseg::Error>(m, "LitesegError", PyExc_RuntimeError);

    m.def("num_threads", &liteseg::num_threads);
    m.def("set_num_threads", &liteseg::set_num_threads, py::arg("n"));

    // tensor-level operations
    m.def(
        "conv2d",
        [](const FloatArray& x, const FloatArray& w, py::object bias, int stride, int padding) {
            Tensor b;
            if (!bias.is_none()) b = tensor_from_array(bias.cast<FloatArray>());
            return array_from_tensor(
                liteseg::conv2d(tensor_from_array(x), tensor_from_array(w), b, stride, padding));
        },
        py::arg("x"), py::arg("weight"), py::arg("bias") = py::none(), py::arg("stride") = 1,
        py::arg("padding") = 0);
    m.def("relu",
          [](const FloatArray& x) { return array_from_tensor(liteseg::relu(tensor_from_array(x))); });
    m.def("sigmoid", [](const FloatArray& x) {
        return array_from_tensor(liteseg::sigmoid(tensor_from_array(x)));
    });
    m.def(
        "bilinear_upsample",
        [](const FloatArray& x, int out_h, int out_w) {
            return array_from_tensor(liteseg::bilinear_upsample(tensor_from_array(x), out_h, out_w));
        },
        py::arg("x"), py::arg("out_h"), py::arg("out_w"));
    m.def(
        "adaptive_avg_pool",
        [](const FloatArray& x, int bin_h, int bin_w) {
            return array_from_tensor(liteseg::adaptive_avg_pool(tensor_from_array(x), bin_h, bin_w));
        },
        py::arg("x"), py::arg("bin_h"), py::arg("bin_w"));
    m.def("channel_mean_max", [](const FloatArray& x) {
        auto [mean, mx] = liteseg::channel_mean_max(tensor_from_array(x));
        return py::make_tuple(array_from_tensor(mean), array_from_tensor(mx));
    });
    m.def("spatial_avg_max_pool", [](const FloatArray& x) {
        auto [avg, mx] = liteseg::spatial_avg_max_pool(tensor_from_array(x));
        return py::make_tuple(array_from_tensor(avg), array_from_tensor(mx));
    });
    m.def(
        "uafm_blend",
        [](const FloatArray& f_up, const FloatArray& f_low, const FloatArray& alpha) {
            return array_from_tensor(liteseg::uafm_blend(
                tensor_from_array(f_up), tensor_from_array(f_low), tensor_from_array(alpha)));
        },
        py::arg("f_up"), py::arg("f_low"), py::arg("alpha"));

    py::class_<liteseg::PPLiteSeg>(m, "Model")
        .def(py::init([](const std::string& config_json, std::uint64_t seed) {
                 return liteseg::PPLiteSeg(liteseg::ModelConfig::from_json(config_json), seed);
             }),
             py::arg("config_json"), py::arg("seed") = 0)
        .def_static(
            "preset",
            [](const std::string& name, std::uint64_t seed) {
                return liteseg::PPLiteSeg(liteseg::ModelConfig::preset(name), seed);
            },
            py::arg("name"), py::arg("seed") = 0)
        .def("config_json",
             [](const liteseg::PPLiteSeg& model) { return model.config().to_json(); })
        .def(
            "forward",
            [](liteseg::PPLiteSeg& model, const FloatArray& image) {
                liteseg::NoGradGuard guard;
                return array_from_tensor(model.forward(tensor_from_array(image), false));
            },
            py::arg("image"), "eval-mode logits [N,K,H,W] for a [N,3,H,W] image")
        .def(
            "predict",
            [](liteseg::PPLiteSeg& model, const FloatArray& image) {
                return array_from_labels(model.predict(tensor_from_array(image)));
            },
            py::arg("image"), "per-pixel argmax labels [N,H,W]")
        .def("num_parameters", [](const liteseg::PPLiteSeg& m2) { return m2.num_parameters(true); })
        .def("save", [](const liteseg::PPLiteSeg& model, const std::string& path) {
            liteseg::save_checkpoint(model, path);
        });

    m.def("load_model", &liteseg::load_checkpoint, py::arg("path"));

    m.def(
        "miou",
        [](const LabelArray& pred, const LabelArray& gt, int num_classes) {
            liteseg::ConfusionMatrix cm(num_classes);
            cm.accumulate(labels_from_array(pred), labels_from_array(gt));
            liteseg::IouResult result = liteseg::miou(cm);
            return py::make_tuple(result.mean, result.per_class);
        },
        py::arg("pred"), py::arg("gt"), py::arg("num_classes"),
        "(mean IoU, per-class IoU) over [N,H,W] label arrays; gt 255 ignored");

    m.def(
        "train_from_json",
        [](const std::string& config_json, const std::string& checkpoint_out) {
            liteseg::TrainConfig cfg = liteseg::TrainConfig::from_json(config_json);
            auto dataset = cfg.dataset.open();
            liteseg::PPLiteSeg model(cfg.model, cfg.seed);
            liteseg::TrainResult result = liteseg::train(model, *dataset, cfg);
            liteseg::save_checkpoint(model, checkpoint_out);
            py::array_t<float> losses(static_cast<py::ssize_t>(result.curve.size()));
            for (std::size_t i = 0; i < result.curve.size(); ++i) {
                losses.mutable_data()[i] = result.curve[i].loss;
            }
            return losses;
        },
        py::arg("config_json"), py::arg("checkpoint_out"),
        "train per the JSON config, save a checkpoint, return the loss curve");

    m.def(
        "bench",
        [](liteseg::PPLiteSeg& model, int res_h, int res_w, int warmup, int runs) {
            liteseg::BenchReport r = liteseg::run_bench(model, res_h, res_w, warmup, runs);
            py::dict out;
            out["mean_ms"] = r.mean_ms;
            out["fps"] = r.fps;
            out["run_ms"] = r.run_ms;
            return out;
        },
        py::arg("model"), py::arg("res_h"), py::arg("res_w"), py::arg("warmup") = 1,
        py::arg("runs") = 3);

    py::class_<liteseg::SyntheticShapesDataset>(m, "SyntheticShapesDataset")
        .def(py::init<std::uint64_t, int>(), py::arg("seed"), py::arg("num_samples"))
        .def("__len__", &liteseg::SyntheticShapesDataset::size)
        .def(
            "get",
            [](const liteseg::SyntheticShapesDataset& ds, int index) {
                liteseg::Sample s = ds.get(index);
                return py::make_tuple(array_from_tensor(s.image), array_from_labels(s.label));
            },
            py::arg("index"), "([3,H,W] image in [0,1], [1,H,W] labels)");
}
