#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "benford/dataset.hpp"

namespace benford {

enum class IdxErrorKind { Io, BadMagic, Truncated, TrailingData, CountMismatch };

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  IdxErrorKind kind() const noexcept { return kind_; }

 private:
  IdxErrorKind kind_;
};

/// Raw IDX image file: big-endian magic 0x00000803, count, rows, cols, then
/// count * rows * cols unsigned bytes.
struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// Raw IDX label file: big-endian magic 0x00000801, count, then count bytes.
struct IdxLabels {
  std::vector<std::uint8_t> labels;
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
IdxLabels parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(const IdxLabels& labels);

/// Whole-file read; gzip streams (the usual MNIST distribution) are inflated.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Pixels are mapped to unit scale by /255; ids are "<prefix>-<index>".
/// A valid file pair with zero images yields an empty dataset and a warning.
LabeledDataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path, const std::string& id_prefix = "mnist");

/// Writes uncompressed IDX files. Pixels are rounded to the nearest byte, so
/// datasets that came from IDX files are reproduced exactly.
void write_mnist_idx(const LabeledDataset& dataset, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

struct MnistSplits {
  LabeledDataset train;
  LabeledDataset test;
};

/// Loads {train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz] from a directory.
MnistSplits load_mnist_dir(const std::filesystem::path& dir);

}  // namespace benford
