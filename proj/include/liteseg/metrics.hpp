#pragma once

#include <vector>

#include "liteseg/label_map.hpp"
#include "liteseg/errors.hpp"

namespace liteseg {

// K x K counts; rows are ground truth, columns predictions. Ignored pixels
// (gt == 255) are excluded. Accumulation is integer and order-independent.
class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(int num_classes);

    int num_classes() const { return k_; }
    std::uint64_t at(int gt, int pred) const {
        return counts_[static_cast<std::size_t>(gt) * k_ + pred];
    }
    std::uint64_t& at(int gt, int pred) {
        return counts_[static_cast<std::size_t>(gt) * k_ + pred];
    }
    std::uint64_t total() const;

    void accumulate(const LabelMap& pred, const LabelMap& gt);
    void merge(const ConfusionMatrix& other);

  private:
    int k_;
    std::vector<std::uint64_t> counts_;
};

struct IouResult {
    // Per-class IoU; classes with zero union carry a negative sentinel and are
    // excluded from the mean.
    std::vector<double> per_class;
    double mean = 0.0;
};

IouResult miou(const ConfusionMatrix& cm);

}  // namespace liteseg
