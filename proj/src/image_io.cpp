#include "liteseg/image_io.hpp"

#include <zlib.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace liteseg {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image '" + path + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

const std::uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    put_u32be(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + payload.size())));
    put_u32be(out, crc);
}

// PNG scanline unfiltering, filter types 0-4.
void unfilter_scanlines(std::vector<std::uint8_t>& raw, int h, std::size_t stride, int bpp) {
    for (int y = 0; y < h; ++y) {
        std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
        const std::uint8_t filter = row[0];
        std::uint8_t* cur = row + 1;
        const std::uint8_t* prev =
            y > 0 ? raw.data() + static_cast<std::size_t>(y - 1) * (stride + 1) + 1 : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            const int a = x >= static_cast<std::size_t>(bpp) ? cur[x - bpp] : 0;
            const int b = prev != nullptr ? prev[x] : 0;
            const int c = (prev != nullptr && x >= static_cast<std::size_t>(bpp)) ? prev[x - bpp] : 0;
            int add = 0;
            switch (filter) {
                case 0: add = 0; break;
                case 1: add = a; break;
                case 2: add = b; break;
                case 3: add = (a + b) / 2; break;
                case 4: {
                    int p = a + b - c;
                    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                    add = (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    break;
                }
                default: throw IoError("PNG: unknown filter type " + std::to_string(filter));
            }
            cur[x] = static_cast<std::uint8_t>((cur[x] + add) & 0xFF);
        }
    }
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0) {
        throw IoError("'" + path + "' is not a PNG file");
    }
    Image img;
    int bit_depth = 0, color_type = -1;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t len = get_u32be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw IoError("PNG: truncated chunk in '" + path + "'");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* payload = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw IoError("PNG: bad IHDR");
            img.w = static_cast<int>(get_u32be(payload));
            img.h = static_cast<int>(get_u32be(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw IoError("PNG: interlaced images are not supported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (bit_depth != 8) {
        throw IoError("PNG: unsupported bit depth " + std::to_string(bit_depth) +
                      " in '" + path + "' (only 8-bit supported)");
    }
    if (color_type != 0 && color_type != 2) {
        throw IoError("PNG: unsupported color type " + std::to_string(color_type) +
                      " in '" + path + "' (only gray and RGB supported)");
    }
    img.channels = color_type == 0 ? 1 : 3;
    if (img.w < 1 || img.h < 1) throw IoError("PNG: empty image '" + path + "'");

    const std::size_t stride = static_cast<std::size_t>(img.w) * img.channels;
    std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(img.h));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    int rc = ::uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (rc != Z_OK || raw_len != raw.size()) {
        throw IoError("PNG: IDAT decompression failed for '" + path + "'");
    }
    unfilter_scanlines(raw, img.h, stride, img.channels);

    img.data.resize(stride * static_cast<std::size_t>(img.h));
    for (int y = 0; y < img.h; ++y) {
        std::memcpy(img.data.data() + static_cast<std::size_t>(y) * stride,
                    raw.data() + static_cast<std::size_t>(y) * (stride + 1) + 1, stride);
    }
    return img;
}

Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    // Binary P5 (gray) / P6 (RGB), maxval 255.
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
        return tok;
    };
    std::string magic = next_token();
    if (magic != "P5" && magic != "P6") throw IoError("'" + path + "' is not a binary PGM/PPM");
    Image img;
    img.channels = magic == "P5" ? 1 : 3;
    img.w = std::stoi(next_token());
    img.h = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (maxval != 255) {
        throw IoError("PNM: unsupported max value " + std::to_string(maxval) +
                      " in '" + path + "' (only 8-bit supported)");
    }
    ++pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(img.w) * img.h * img.channels;
    if (bytes.size() < pos + need) throw IoError("PNM: truncated pixel data in '" + path + "'");
    img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return img;
}

}  // namespace

Image read_image(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file(path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
        return decode_png(bytes, path);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
        return decode_pnm(bytes, path);
    }
    throw IoError("unrecognized image format for '" + path + "'");
}

void write_png(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw IoError("write_png supports 1 or 3 channels, got " + std::to_string(image.channels));
    }
    const std::size_t stride = static_cast<std::size_t>(image.w) * image.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * static_cast<std::size_t>(image.h));
    for (int y = 0; y < image.h; ++y) {
        raw.push_back(0);  // filter type None
        const std::uint8_t* row = image.data.data() + static_cast<std::size_t>(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }
    uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (::compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK) {
        throw IoError("PNG: compression failed for '" + path + "'");
    }
    compressed.resize(bound);

    std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
    std::vector<std::uint8_t> ihdr;
    put_u32be(ihdr, static_cast<std::uint32_t>(image.w));
    put_u32be(ihdr, static_cast<std::uint32_t>(image.h));
    ihdr.push_back(8);                                        // bit depth
    ihdr.push_back(image.channels == 1 ? 0 : 2);              // gray / RGB
    ihdr.push_back(0);                                        // compression
    ihdr.push_back(0);                                        // filter
    ihdr.push_back(0);                                        // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", {});

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write image '" + path + "'");
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("failed writing image '" + path + "'");
}

void write_pnm(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw IoError("write_pnm supports 1 or 3 channels, got " + std::to_string(image.channels));
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write image '" + path + "'");
    file << (image.channels == 1 ? "P5" : "P6") << "\n"
         << image.w << " " << image.h << "\n255\n";
    file.write(reinterpret_cast<const char*>(image.data.data()),
               static_cast<std::streamsize>(image.data.size()));
    if (!file) throw IoError("failed writing image '" + path + "'");
}

void write_image(const std::string& path, const Image& image) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "png") {
        write_png(path, image);
    } else if (ext == "ppm" || ext == "pgm") {
        write_pnm(path, image);
    } else {
        throw IoError("unsupported image extension '" + ext + "' (use .png, .ppm or .pgm)");
    }
}

Tensor image_to_tensor(const Image& image) {
    Tensor t = Tensor::zeros({3, image.h, image.w});
    const std::int64_t plane = static_cast<std::int64_t>(image.h) * image.w;
    float* out = t.data();
    for (std::int64_t i = 0; i < plane; ++i) {
        if (image.channels == 1) {
            float v = static_cast<float>(image.data[static_cast<std::size_t>(i)]) / 255.0f;
            out[i] = v;
            out[plane + i] = v;
            out[2 * plane + i] = v;
        } else {
            out[i] = static_cast<float>(image.data[static_cast<std::size_t>(3 * i)]) / 255.0f;
            out[plane + i] = static_cast<float>(image.data[static_cast<std::size_t>(3 * i + 1)]) / 255.0f;
            out[2 * plane + i] = static_cast<float>(image.data[static_cast<std::size_t>(3 * i + 2)]) / 255.0f;
        }
    }
    return t;
}

Image labels_to_image(const LabelMap& labels) {
    Image img(labels.h, labels.w, 1);
    std::copy(labels.values.begin(), labels.values.begin() + static_cast<std::int64_t>(labels.h) * labels.w,
              img.data.begin());
    return img;
}

std::array<std::uint8_t, 3> palette_color(int class_id) {
    if (class_id == kIgnoreLabel) return {0, 0, 0};
    // Low-discrepancy hue walk; distinct for any reasonable class count.
    const float hue = std::fmod(0.61803398875f * static_cast<float>(class_id + 1), 1.0f) * 6.0f;
    const int sector = static_cast<int>(hue);
    const float frac = hue - static_cast<float>(sector);
    const float v = 0.95f, p = 0.15f;
    const float q = v - (v - p) * frac;
    const float t = p + (v - p) * frac;
    float r = 0, g = 0, b = 0;
    switch (sector % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        case 5: r = v; g = p; b = q; break;
    }
    return {static_cast<std::uint8_t>(r * 255.0f), static_cast<std::uint8_t>(g * 255.0f),
            static_cast<std::uint8_t>(b * 255.0f)};
}

Image labels_to_palette_image(const LabelMap& labels) {
    Image img(labels.h, labels.w, 3);
    const std::int64_t plane = static_cast<std::int64_t>(labels.h) * labels.w;
    for (std::int64_t i = 0; i < plane; ++i) {
        auto color = palette_color(labels.values[static_cast<std::size_t>(i)]);
        img.data[static_cast<std::size_t>(3 * i)] = color[0];
        img.data[static_cast<std::size_t>(3 * i + 1)] = color[1];
        img.data[static_cast<std::size_t>(3 * i + 2)] = color[2];
    }
    return img;
}

}  // namespace liteseg
