#include "liteseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace liteseg {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'L', 'S'};
constexpr std::size_t kAlign = 64;

using Kind = CheckpointError::Kind;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

class Reader {
  public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open checkpoint file '" + path + "'");
    }

    void read(void* dst, std::size_t n, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw CheckpointError(Kind::Truncated,
                                  std::string("checkpoint truncated while reading ") + what);
        }
        offset_ += n;
    }

    std::uint32_t read_u32(const char* what) {
        unsigned char b[4];
        read(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::uint16_t read_u16(const char* what) {
        unsigned char b[2];
        read(b, 2, what);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint8_t read_u8(const char* what) {
        unsigned char b;
        read(&b, 1, what);
        return b;
    }

    void skip_padding() {
        std::size_t rem = offset_ % kAlign;
        if (rem == 0) return;
        char buf[kAlign];
        read(buf, kAlign - rem, "alignment padding");
    }

    std::size_t offset() const { return offset_; }

  private:
    std::ifstream in_;
    std::size_t offset_ = 0;
};

}  // namespace

void write_named_tensors(const std::string& path, const std::string& config_json,
                         const std::vector<ParamRef>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint file '" + path + "'");
    std::size_t offset = 0;
    auto count = [&offset](std::size_t n) { offset += n; };

    out.write(kMagic, 4);
    count(4);
    write_u32(out, kCheckpointVersion);
    count(4);
    write_u32(out, static_cast<std::uint32_t>(config_json.size()));
    count(4);
    out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
    count(config_json.size());
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    count(4);

    for (const ParamRef& p : tensors) {
        if (p.name.size() > 0xFFFF) throw IoError("tensor name too long: " + p.name);
        write_u16(out, static_cast<std::uint16_t>(p.name.size()));
        count(2);
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        count(p.name.size());
        out.put(0);  // dtype 0 = f32 little-endian
        const Shape& shape = p.tensor.shape();
        out.put(static_cast<char>(shape.size()));
        count(2);
        for (int d : shape) {
            write_u32(out, static_cast<std::uint32_t>(d));
            count(4);
        }
        std::size_t rem = offset % kAlign;
        if (rem != 0) {
            static const char zeros[kAlign] = {};
            out.write(zeros, static_cast<std::streamsize>(kAlign - rem));
            count(kAlign - rem);
        }
        const std::size_t bytes = static_cast<std::size_t>(p.tensor.numel()) * sizeof(float);
        out.write(reinterpret_cast<const char*>(p.tensor.data()),
                  static_cast<std::streamsize>(bytes));
        count(bytes);
    }
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

NamedTensorFile read_named_tensors(const std::string& path) {
    Reader reader(path);
    char magic[4];
    reader.read(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError(Kind::NotACheckpoint, "'" + path + "' is not a checkpoint file");
    }
    std::uint32_t version = reader.read_u32("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError(Kind::VersionMismatch,
                              "checkpoint version " + std::to_string(version) +
                                  " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
    }

    NamedTensorFile file;
    std::uint32_t config_len = reader.read_u32("config length");
    file.config_json.resize(config_len);
    if (config_len > 0) reader.read(file.config_json.data(), config_len, "config");

    std::uint32_t count = reader.read_u32("tensor count");
    file.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = reader.read_u16("tensor name length");
        std::string name(name_len, '\0');
        if (name_len > 0) reader.read(name.data(), name_len, "tensor name");
        std::uint8_t dtype = reader.read_u8("dtype");
        if (dtype != 0) {
            throw CheckpointError(Kind::NotACheckpoint,
                                  "unsupported dtype code " + std::to_string(dtype) + " for '" +
                                      name + "'");
        }
        std::uint8_t rank = reader.read_u8("rank");
        Shape shape(rank);
        for (std::uint8_t r = 0; r < rank; ++r) {
            shape[r] = static_cast<int>(reader.read_u32("dimension"));
        }
        reader.skip_padding();
        std::vector<float> data(static_cast<std::size_t>(shape_numel(shape)));
        if (!data.empty()) reader.read(data.data(), data.size() * sizeof(float), name.c_str());
        file.tensors.emplace_back(name, Tensor::from_vector(shape, std::move(data)));
    }
    return file;
}

void save_checkpoint(const PPLiteSeg& model, const std::string& path) {
    write_named_tensors(path, model.config().to_json(), model.named_parameters());
}

namespace {

void load_tensors_into(PPLiteSeg& model, const NamedTensorFile& file) {
    std::map<std::string, Tensor> params;
    for (const ParamRef& p : model.named_parameters()) params.emplace(p.name, p.tensor);

    std::size_t matched = 0;
    for (const auto& [name, tensor] : file.tensors) {
        auto it = params.find(name);
        if (it == params.end()) {
            throw CheckpointError(Kind::UnknownTensor,
                                  "checkpoint tensor '" + name + "' does not exist in the model");
        }
        if (!shape_eq(it->second.shape(), tensor.shape())) {
            throw CheckpointError(Kind::ShapeMismatch,
                                  "checkpoint tensor '" + name + "' has shape " +
                                      shape_str(tensor.shape()) + ", model expects " +
                                      shape_str(it->second.shape()));
        }
        std::copy(tensor.vec().begin(), tensor.vec().end(), it->second.vec().begin());
        ++matched;
    }
    if (matched != params.size()) {
        for (const auto& [name, tensor] : params) {
            bool found = false;
            for (const auto& [fname, ft] : file.tensors) {
                if (fname == name) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw CheckpointError(Kind::MissingTensor,
                                      "checkpoint is missing model tensor '" + name + "'");
            }
        }
    }
}

}  // namespace

PPLiteSeg load_checkpoint(const std::string& path) {
    NamedTensorFile file = read_named_tensors(path);
    ModelConfig cfg;
    try {
        cfg = ModelConfig::from_json(file.config_json);
    } catch (const ConfigError& e) {
        throw CheckpointError(Kind::NotACheckpoint,
                              std::string("checkpoint has no usable config echo: ") + e.what());
    }
    PPLiteSeg model(cfg, /*seed=*/0);
    load_tensors_into(model, file);
    return model;
}

void load_checkpoint_into(PPLiteSeg& model, const std::string& path) {
    NamedTensorFile file = read_named_tensors(path);
    ModelConfig cfg = ModelConfig::from_json(file.config_json);
    if (!(cfg == model.config())) {
        throw CheckpointError(Kind::ConfigMismatch,
                              "checkpoint config does not match the model: checkpoint " +
                                  cfg.to_json() + " vs model " + model.config().to_json());
    }
    load_tensors_into(model, file);
}

}  // namespace liteseg
