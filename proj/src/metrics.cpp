#include "liteseg/metrics.hpp"

#include <numeric>

namespace liteseg {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
    if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
    counts_.assign(static_cast<std::size_t>(k_) * k_, 0);
}

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
    if (pred.n != gt.n || pred.h != gt.h || pred.w != gt.w) {
        throw ShapeError("confusion matrix accumulate: prediction and ground truth sizes differ");
    }
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        const std::uint8_t g = gt.values[i];
        if (g == kIgnoreLabel) continue;
        const std::uint8_t p = pred.values[i];
        if (g >= k_) {
            throw ShapeError("ground-truth label " + std::to_string(g) + " out of range for " +
                             std::to_string(k_) + " classes");
        }
        if (p >= k_) {
            throw ShapeError("predicted label " + std::to_string(p) + " out of range for " +
                             std::to_string(k_) + " classes");
        }
        ++at(g, p);
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw ShapeError("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

IouResult miou(const ConfusionMatrix& cm) {
    const int k = cm.num_classes();
    IouResult result;
    result.per_class.assign(static_cast<std::size_t>(k), -1.0);
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < k; ++c) {
        std::uint64_t tp = cm.at(c, c);
        std::uint64_t fp = 0, fn = 0;
        for (int o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const std::uint64_t unionc = tp + fp + fn;
        if (unionc == 0) continue;  // class absent from both; excluded
        double iou = static_cast<double>(tp) / static_cast<double>(unionc);
        result.per_class[static_cast<std::size_t>(c)] = iou;
        sum += iou;
        ++counted;
    }
    if (counted == 0) throw Error("miou: no class has any ground truth or prediction");
    result.mean = sum / counted;
    return result;
}

}  // namespace liteseg
