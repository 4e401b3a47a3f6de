#pragma once

#include <string>
#include <utility>
#include <vector>

#include "liteseg/model.hpp"

namespace liteseg {

// Binary named-tensor container, little-endian:
//   "PPLS" | u32 version | u32 config_len | config JSON | u32 tensor_count
//   per tensor: u16 name_len | name | u8 dtype (0 = f32) | u8 rank | u32 dims
//   then zero padding so the raw f32 data starts on a 64-byte file offset.
// Round trips are bit-exact.
constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensorFile {
    std::string config_json;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

void write_named_tensors(const std::string& path, const std::string& config_json,
                         const std::vector<ParamRef>& tensors);
NamedTensorFile read_named_tensors(const std::string& path);

// Saves parameters and buffers together with the model config echo.
void save_checkpoint(const PPLiteSeg& model, const std::string& path);

// Rebuilds the model from the embedded config and loads every tensor.
PPLiteSeg load_checkpoint(const std::string& path);

// Loads into an existing model; the stored config must match exactly.
void load_checkpoint_into(PPLiteSeg& model, const std::string& path);

}  // namespace liteseg
