#pragma once

#include <array>
#include <string>

#include "liteseg/label_map.hpp"
#include "liteseg/tensor.hpp"

namespace liteseg {

// 8-bit image, HWC interleaved; channels is 1 (gray) or 3 (RGB).
struct Image {
    int h = 0, w = 0, channels = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int h_, int w_, int channels_)
        : h(h_), w(w_), channels(channels_),
          data(static_cast<std::size_t>(h_) * w_ * channels_, 0) {}
};

// Reads PNG (8-bit gray/RGB, non-interlaced) or binary PPM/PGM, picked by the
// file's magic bytes. Writes round-trip pixel values exactly.
Image read_image(const std::string& path);
void write_png(const std::string& path, const Image& image);
void write_pnm(const std::string& path, const Image& image);
// Dispatches on the extension (.png / .ppm / .pgm).
void write_image(const std::string& path, const Image& image);

// [1,3,H,W] float tensor in [0,1].
Tensor image_to_tensor(const Image& image);

// Single-channel image of class ids (first batch entry of the label map).
Image labels_to_image(const LabelMap& labels);

// Distinct color per class id for mask visualization.
std::array<std::uint8_t, 3> palette_color(int class_id);
Image labels_to_palette_image(const LabelMap& labels);

}  // namespace liteseg
