#include "liteseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "liteseg/image_io.hpp"

namespace liteseg {

SyntheticShapesDataset::SyntheticShapesDataset(std::uint64_t seed, int num_samples)
    : seed_(seed), num_samples_(num_samples) {
    if (num_samples < 1) throw ConfigError("synthetic dataset needs at least one sample");
}

namespace {

struct Painter {
    float* r;
    float* g;
    float* b;
    LabelMap* label;
    int h, w;

    void set(int y, int x, float cr, float cg, float cb, std::uint8_t cls) {
        if (y < 0 || y >= h || x < 0 || x >= w) return;
        std::int64_t i = static_cast<std::int64_t>(y) * w + x;
        r[i] = cr;
        g[i] = cg;
        b[i] = cb;
        label->at(0, y, x) = cls;
    }
};

}  // namespace

Sample SyntheticShapesDataset::get(int index) const {
    if (index < 0 || index >= num_samples_) throw ConfigError("synthetic sample index out of range");
    std::mt19937 rng = derive_rng(seed_, static_cast<std::uint64_t>(index) + 1);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);

    Sample s;
    s.image = Tensor::zeros({3, kHeight, kWidth});
    s.label = LabelMap(1, kHeight, kWidth, 0);
    const std::int64_t plane = static_cast<std::int64_t>(kHeight) * kWidth;
    float* r = s.image.data();
    float* g = r + plane;
    float* b = g + plane;

    // Dim gray background.
    const float bg = 0.10f + 0.25f * unit(rng);
    for (std::int64_t i = 0; i < plane; ++i) {
        r[i] = bg;
        g[i] = bg;
        b[i] = bg;
    }

    Painter paint{r, g, b, &s.label, kHeight, kWidth};

    // One shape per horizontal slot so all three classes appear in every
    // sample; slot order is shuffled per sample.
    const int slot_w = kWidth / 3;
    std::array<int, 3> slots{0, 1, 2};
    for (int i = 2; i > 0; --i) {
        int j = std::uniform_int_distribution<int>(0, i)(rng);
        std::swap(slots[static_cast<std::size_t>(i)], slots[static_cast<std::size_t>(j)]);
    }

    for (int shape = 0; shape < 3; ++shape) {
        const int slot = slots[static_cast<std::size_t>(shape)];
        const int x_lo = slot * slot_w + 4;
        const int x_hi = (slot + 1) * slot_w - 4;
        const int cx = std::uniform_int_distribution<int>(x_lo + 8, x_hi - 8)(rng);
        const int cy = std::uniform_int_distribution<int>(16, kHeight - 16)(rng);
        const float shade = 0.55f + 0.4f * unit(rng);
        const float off = 0.05f + 0.15f * unit(rng);

        if (shape == 0) {  // rectangle, reddish, class 1
            int half_w = std::uniform_int_distribution<int>(5, 14)(rng);
            int half_h = std::uniform_int_distribution<int>(5, 14)(rng);
            for (int y = cy - half_h; y <= cy + half_h; ++y) {
                for (int x = cx - half_w; x <= cx + half_w; ++x) {
                    paint.set(y, x, shade, off, off, 1);
                }
            }
        } else if (shape == 1) {  // disk, greenish, class 2
            int radius = std::uniform_int_distribution<int>(6, 14)(rng);
            for (int y = cy - radius; y <= cy + radius; ++y) {
                for (int x = cx - radius; x <= cx + radius; ++x) {
                    int dy = y - cy, dx = x - cx;
                    if (dy * dy + dx * dx <= radius * radius) paint.set(y, x, off, shade, off, 2);
                }
            }
        } else {  // upward triangle, bluish, class 3
            int size = std::uniform_int_distribution<int>(8, 15)(rng);
            for (int row = 0; row < size; ++row) {
                int y = cy - size / 2 + row;
                for (int x = cx - row; x <= cx + row; ++x) paint.set(y, x, off, off, shade, 3);
            }
        }
    }

    // Mild pixel noise on top of everything.
    std::normal_distribution<float> noise(0.0f, 0.03f);
    for (std::int64_t i = 0; i < plane; ++i) {
        r[i] = std::clamp(r[i] + noise(rng), 0.0f, 1.0f);
        g[i] = std::clamp(g[i] + noise(rng), 0.0f, 1.0f);
        b[i] = std::clamp(b[i] + noise(rng), 0.0f, 1.0f);
    }
    return s;
}

ManifestDataset::ManifestDataset(const std::string& manifest_path, int num_classes)
    : num_classes_(num_classes) {
    if (num_classes < 2) throw ConfigError("manifest dataset needs at least 2 classes");
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest '" + manifest_path + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw IoError("manifest line without TAB separator: '" + line + "'");
        }
        entries_.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    if (entries_.empty()) throw IoError("manifest '" + manifest_path + "' lists no samples");
}

Sample ManifestDataset::get(int index) const {
    const auto& [image_path, label_path] = entries_[static_cast<std::size_t>(index)];
    Sample s;
    s.image = image_to_tensor(read_image(image_path));
    Image label_img = read_image(label_path);
    if (label_img.channels != 1) {
        throw IoError("label image '" + label_path + "' must be single-channel");
    }
    s.label = LabelMap(1, label_img.h, label_img.w);
    std::copy(label_img.data.begin(), label_img.data.end(), s.label.values.begin());
    if (s.label.h != s.image.dim(1) || s.label.w != s.image.dim(2)) {
        throw ShapeError("image/label size mismatch for '" + image_path + "'");
    }
    return s;
}

}  // namespace liteseg
