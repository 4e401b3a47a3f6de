#pragma once

#include <memory>
#include <string>

#include "liteseg/augment.hpp"

namespace liteseg {

class Dataset {
  public:
    virtual ~Dataset() = default;
    virtual int size() const = 0;
    virtual int num_classes() const = 0;
    // Raw sample (image values in [0,1], labels unpadded).
    virtual Sample get(int index) const = 0;
};

// Deterministic synthetic scenes: a noisy background plus one rectangle, one
// disk and one triangle per image (classes 1..3, background 0). Sample i is a
// pure function of (seed, i).
class SyntheticShapesDataset : public Dataset {
  public:
    static constexpr int kHeight = 64;
    static constexpr int kWidth = 128;
    static constexpr int kClasses = 4;

    SyntheticShapesDataset(std::uint64_t seed, int num_samples);

    int size() const override { return num_samples_; }
    int num_classes() const override { return kClasses; }
    Sample get(int index) const override;

  private:
    std::uint64_t seed_;
    int num_samples_;
};

// Manifest file with one "image_path<TAB>label_path" pair per line; labels are
// single-channel 8-bit with 255 as the ignore value.
class ManifestDataset : public Dataset {
  public:
    ManifestDataset(const std::string& manifest_path, int num_classes);

    int size() const override { return static_cast<int>(entries_.size()); }
    int num_classes() const override { return num_classes_; }
    Sample get(int index) const override;

    const std::pair<std::string, std::string>& entry(int index) const {
        return entries_[static_cast<std::size_t>(index)];
    }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
    int num_classes_;
};

}  // namespace liteseg
