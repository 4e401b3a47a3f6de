#pragma once

#include <cstdint>
#include <vector>

namespace liteseg {

// Per-pixel integer class labels for a batch; 255 marks ignored pixels.
constexpr std::uint8_t kIgnoreLabel = 255;

struct LabelMap {
    int n = 0, h = 0, w = 0;
    std::vector<std::uint8_t> values;  // n*h*w, row-major with w fastest

    LabelMap() = default;
    LabelMap(int n_, int h_, int w_, std::uint8_t fill = 0)
        : n(n_), h(h_), w(w_),
          values(static_cast<std::size_t>(n_) * h_ * w_, fill) {}

    std::int64_t numel() const { return static_cast<std::int64_t>(n) * h * w; }
    std::uint8_t& at(int ni, int hi, int wi) {
        return values[(static_cast<std::size_t>(ni) * h + hi) * w + wi];
    }
    std::uint8_t at(int ni, int hi, int wi) const {
        return values[(static_cast<std::size_t>(ni) * h + hi) * w + wi];
    }
};

}  // namespace liteseg
