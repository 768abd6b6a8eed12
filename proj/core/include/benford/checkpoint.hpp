#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "benford/tinynet.hpp"

namespace benford::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint container, version 1. All integers little-endian.
///
///   bytes  field
///   8      magic "BNFDNET\0"
///   4      u32 version (1)
///   12     u32 input height, width, channels
///   4      u32 layer count L
///   5*L    per layer: u8 tag, u32 argument
///          tags: 1 Conv2D(out_channels) 2 ReLU 3 MaxPool2 4 Flatten
///                5 Dense(out_dim) 6 Softmax; argument 0 when unused
///   8      u64 parameter count N
///   8*N    f64 parameters in Model::parameters() order
///   4      u32 CRC-32 of every preceding byte
std::vector<std::uint8_t> encode_checkpoint(const Model& model);

/// Throws CheckpointError on bad magic, unsupported version, unknown layer
/// tag, inconsistent shapes, size mismatch, truncation or checksum failure.
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace benford::nn
